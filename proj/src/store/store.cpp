#include "ca/store.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>

namespace ca {

static_assert(std::endian::native == std::endian::little, "on-disk format assumes a little-endian host");

namespace {

constexpr std::uint64_t kMagic1D = 0x5153'5152'424C'4B31ull;
constexpr std::uint64_t kMagic2D = 0x5153'5152'424C'4B32ull;

class MemoryStorage final : public SlowStorage {
public:
    explicit MemoryStorage(std::size_t words) : data_(words, 0.0) {}
    void read(std::size_t off, std::size_t n, double* out) override {
        std::copy_n(data_.data() + off, n, out);
    }
    void write(std::size_t off, std::size_t n, const double* in) override {
        std::copy_n(in, n, data_.data() + off);
    }

private:
    std::vector<double> data_;
};

class FileStorage final : public SlowStorage {
public:
    FileStorage(std::string path, std::FILE* f, std::size_t header_words)
        : path_(std::move(path)), f_(f), base_(header_words * 8) {}
    ~FileStorage() override {
        if (f_) std::fclose(f_);
    }

    static std::unique_ptr<FileStorage> create(const std::string& path, const std::vector<std::uint64_t>& header,
                                               std::size_t words) {
        std::FILE* f = std::fopen(path.c_str(), "w+b");
        if (!f) throw IoError("cannot create '" + path + "': " + std::strerror(errno));
        auto s = std::make_unique<FileStorage>(path, f, header.size());
        if (std::fwrite(header.data(), 8, header.size(), f) != header.size()) s->fail("write header");
        std::vector<double> zeros(std::min<std::size_t>(words, 1 << 16), 0.0);
        for (std::size_t done = 0; done < words;) {
            std::size_t k = std::min(zeros.size(), words - done);
            if (std::fwrite(zeros.data(), 8, k, f) != k) s->fail("write");
            done += k;
        }
        std::fflush(f);
        return s;
    }

    void read(std::size_t off, std::size_t n, double* out) override {
        seek(off);
        if (std::fread(out, 8, n, f_) != n) fail("read");
    }
    void write(std::size_t off, std::size_t n, const double* in) override {
        seek(off);
        if (std::fwrite(in, 8, n, f_) != n) fail("write");
    }

    [[noreturn]] void fail(const char* what) const {
        throw IoError(std::string("cannot ") + what + " '" + path_ + "': " +
                      (errno ? std::strerror(errno) : "unexpected end of file"));
    }

private:
    void seek(std::size_t off) {
        if (fseeko(f_, static_cast<off_t>(base_ + off * 8), SEEK_SET) != 0) fail("seek in");
    }

    std::string path_;
    std::FILE* f_;
    std::size_t base_;
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Row range of column j moved by a partial transfer.
std::pair<std::size_t, std::size_t> column_rows(std::size_t rows, std::size_t j, Part part) {
    switch (part) {
        case Part::full: return {0, rows};
        case Part::lower_with_diag: return {std::min(j, rows), rows};
        case Part::strict_lower: return {std::min(j + 1, rows), rows};
        case Part::upper: return {0, std::min(j + 1, rows)};
    }
    return {0, 0};
}

}  // namespace

Backend Backend::parse(const std::string& s) {
    if (s == "memory") return memory();
    if (s.rfind("file:", 0) == 0 && s.size() > 5) return file(s.substr(5));
    throw ShapeError("backend must be 'memory' or 'file:<path>', got '" + s + "'");
}

std::size_t region_words(std::size_t rows, std::size_t cols, Part part) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        auto [lo, hi] = column_rows(rows, j, part);
        w += hi - lo;
    }
    return w;
}

BlockStore::BlockStore(BlockStore&&) noexcept = default;
BlockStore& BlockStore::operator=(BlockStore&&) noexcept = default;
BlockStore::~BlockStore() = default;

void BlockStore::init(std::size_t m, std::size_t n, std::size_t br, std::size_t cb, bool tau, bool two_d,
                      const Backend& backend) {
    if (m == 0 || n == 0) throw ShapeError("store needs m, n >= 1");
    if (br == 0) throw ShapeError("block_rows must be >= 1");
    if (cb == 0 || cb > n) throw ShapeError("column block count must be in [1, n]");
    m_ = m;
    n_ = n;
    block_rows_ = br;
    row_blocks_ = ceil_div(m, br);
    col_blocks_ = cb;
    block_cols_ = ceil_div(n, cb);
    if ((cb - 1) * block_cols_ >= n)
        throw ShapeError("n=" + std::to_string(n) + " cannot be split into " + std::to_string(cb) + " column blocks");
    tau_ = tau;
    two_d_ = two_d || cb > 1;
    backend_ = backend;
    const std::size_t words = row_blocks_ * col_blocks_ * (block_rows_ * block_cols_ + (tau_ ? block_cols_ : 0));
    if (backend.kind == Backend::Kind::memory)
        slow_ = std::make_unique<MemoryStorage>(words);
    else
        slow_ = FileStorage::create(backend.path, header(), words);
}

std::vector<std::uint64_t> BlockStore::header() const {
    if (two_d_) return {kMagic2D, m_, n_, block_rows_, col_blocks_};
    return {kMagic1D, m_, n_, block_rows_};
}

BlockStore BlockStore::empty(std::size_t m, std::size_t n, std::size_t br, std::size_t cb, bool tau,
                             const Backend& backend, bool two_d) {
    BlockStore s;
    s.init(m, n, br, cb, tau, two_d, backend);
    return s;
}

BlockStore BlockStore::create(const DenseMatrix& A, std::size_t br, const Backend& backend) {
    return create_2d(A, br, 1, backend);
}

BlockStore BlockStore::create_2d(const DenseMatrix& A, std::size_t br, std::size_t cb, const Backend& backend) {
    BlockStore s;
    s.init(A.rows(), A.cols(), br, cb, false, cb > 1, backend);
    for (std::size_t I = 0; I < s.row_blocks_; ++I)
        for (std::size_t J = 0; J < s.col_blocks_; ++J) {
            DenseMatrix t(br, s.col_width(J));
            const std::size_t r0 = I * br, rows = std::min(br, s.m_ - r0);
            t.set_block(0, 0, A.block(r0, J * s.block_cols_, rows, t.cols()));
            s.transfer(Direction::write, I, J, t, nullptr, Part::full, false);
        }
    return s;
}

BlockStore BlockStore::open(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    if (!f) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
    std::uint64_t h[5] = {};
    auto bad = [&](const std::string& why) {
        std::fclose(f);
        throw IoError("'" + path + "' is not a block store: " + why);
    };
    if (std::fread(h, 8, 4, f) != 4) bad("short header");
    const bool two_d = h[0] == kMagic2D;
    if (h[0] != kMagic1D && !two_d) bad("bad magic");
    if (two_d && std::fread(h + 4, 8, 1, f) != 1) bad("short header");
    if (!h[1] || !h[2] || !h[3] || (two_d && (!h[4] || h[4] > h[2]))) bad("bad dimensions");
    BlockStore s;
    s.m_ = h[1];
    s.n_ = h[2];
    s.block_rows_ = h[3];
    s.row_blocks_ = ceil_div(s.m_, s.block_rows_);
    s.col_blocks_ = two_d ? h[4] : 1;
    s.block_cols_ = ceil_div(s.n_, s.col_blocks_);
    s.two_d_ = two_d;
    s.backend_ = Backend::file(path);
    const std::size_t words = s.row_blocks_ * s.col_blocks_ * s.block_rows_ * s.block_cols_;
    std::fseek(f, 0, SEEK_END);
    const auto size = static_cast<std::size_t>(ftello(f));
    const std::size_t hw = two_d ? 5 : 4;
    if (size < (hw + words) * 8) bad("file truncated (" + std::to_string(size) + " bytes)");
    s.slow_ = std::make_unique<FileStorage>(path, f, hw);
    return s;
}

std::size_t BlockStore::col_width(std::size_t J) const {
    if (J >= col_blocks_) throw ShapeError("column block " + std::to_string(J) + " out of range");
    return std::min(block_cols_, n_ - J * block_cols_);
}

void BlockStore::check_tile(std::size_t I, std::size_t J) const {
    if (I >= row_blocks_ || J >= col_blocks_)
        throw ShapeError("tile (" + std::to_string(I) + "," + std::to_string(J) + ") out of range " +
                         std::to_string(row_blocks_) + "x" + std::to_string(col_blocks_));
}

std::size_t BlockStore::tile_offset(std::size_t I, std::size_t J) const {
    const std::size_t stride = block_rows_ * block_cols_ + (tau_ ? block_cols_ : 0);
    return (I * col_blocks_ + J) * stride;
}

void BlockStore::transfer(Direction d, std::size_t I, std::size_t J, DenseMatrix& tile, std::vector<double>* tau,
                          Part part, bool log) {
    const std::size_t w = col_width(J), off = tile_offset(I, J);
    std::size_t words = 0;
    for (std::size_t j = 0; j < w; ++j) {
        auto [lo, hi] = column_rows(block_rows_, j, part);
        if (lo >= hi) continue;
        const std::size_t at = off + j * block_rows_ + lo;
        if (d == Direction::read)
            slow_->read(at, hi - lo, tile.col(j) + lo);
        else
            slow_->write(at, hi - lo, tile.col(j) + lo);
        words += hi - lo;
    }
    if (tau) {
        const std::size_t at = off + block_rows_ * block_cols_;
        if (d == Direction::read)
            slow_->read(at, w, tau->data());
        else
            slow_->write(at, w, tau->data());
        words += w;
    }
    if (log) log_.push_back({d, words});
}

DenseMatrix BlockStore::read_tile(std::size_t I, std::size_t J, Part part) {
    check_tile(I, J);
    DenseMatrix t(block_rows_, col_width(J));
    transfer(Direction::read, I, J, t, nullptr, part, true);
    return t;
}

void BlockStore::write_tile(std::size_t I, std::size_t J, const DenseMatrix& B, Part part) {
    check_tile(I, J);
    if (B.rows() != block_rows_ || B.cols() != col_width(J))
        throw ShapeError("tile write expects " + std::to_string(block_rows_) + "x" + std::to_string(col_width(J)) +
                         ", got " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
    DenseMatrix t = B;
    transfer(Direction::write, I, J, t, nullptr, part, true);
}

std::pair<DenseMatrix, std::vector<double>> BlockStore::read_factor(std::size_t I, std::size_t J, Part part) {
    if (!tau_) throw ShapeError("store has no tau trailer");
    check_tile(I, J);
    DenseMatrix t(block_rows_, col_width(J));
    std::vector<double> tau(col_width(J));
    transfer(Direction::read, I, J, t, &tau, part, true);
    return {std::move(t), std::move(tau)};
}

void BlockStore::write_factor(std::size_t I, std::size_t J, const DenseMatrix& Y, const std::vector<double>& tau,
                              Part part) {
    if (!tau_) throw ShapeError("store has no tau trailer");
    check_tile(I, J);
    if (Y.rows() != block_rows_ || Y.cols() != col_width(J) || tau.size() != col_width(J))
        throw ShapeError("factor write does not match tile shape");
    DenseMatrix t = Y;
    std::vector<double> tt = tau;
    transfer(Direction::write, I, J, t, &tt, part, true);
}

TransferCounters BlockStore::counters() const {
    TransferCounters c;
    for (const auto& t : log_) {
        ++c.messages;
        c.words += t.words;
    }
    return c;
}

TransferCounters BlockStore::counters_since(std::size_t start) const {
    TransferCounters c;
    for (std::size_t i = start; i < log_.size(); ++i) {
        ++c.messages;
        c.words += log_[i].words;
    }
    return c;
}

TransferCounters BlockStore::counters(Direction d) const {
    TransferCounters c;
    for (const auto& t : log_)
        if (t.direction == d) {
            ++c.messages;
            c.words += t.words;
        }
    return c;
}

DenseMatrix BlockStore::snapshot() {
    DenseMatrix A(m_, n_);
    for (std::size_t I = 0; I < row_blocks_; ++I)
        for (std::size_t J = 0; J < col_blocks_; ++J) {
            DenseMatrix t(block_rows_, col_width(J));
            transfer(Direction::read, I, J, t, nullptr, Part::full, false);
            const std::size_t r0 = I * block_rows_;
            A.set_block(r0, J * block_cols_, t.block(0, 0, std::min(block_rows_, m_ - r0), t.cols()));
        }
    return A;
}

DenseMatrix BlockStore::peek_tile(std::size_t I, std::size_t J) {
    check_tile(I, J);
    DenseMatrix t(block_rows_, col_width(J));
    transfer(Direction::read, I, J, t, nullptr, Part::full, false);
    return t;
}

std::pair<DenseMatrix, std::vector<double>> BlockStore::peek_factor(std::size_t I, std::size_t J) {
    if (!tau_) throw ShapeError("store has no tau trailer");
    check_tile(I, J);
    DenseMatrix t(block_rows_, col_width(J));
    std::vector<double> tau(col_width(J));
    transfer(Direction::read, I, J, t, &tau, Part::full, false);
    return {std::move(t), std::move(tau)};
}

FastMemory::Hold& FastMemory::Hold::operator=(Hold&& o) noexcept {
    if (this != &o) {
        release();
        fm_ = o.fm_;
        words_ = o.words_;
        o.fm_ = nullptr;
    }
    return *this;
}

void FastMemory::Hold::release() {
    if (fm_) fm_->resident_ -= words_;
    fm_ = nullptr;
}

FastMemory::Hold FastMemory::hold(std::size_t words) {
    if (resident_ + words > capacity_)
        throw ShapeError("fast memory overflow: " + std::to_string(resident_) + " + " + std::to_string(words) +
                         " words exceeds W=" + std::to_string(capacity_));
    resident_ += words;
    peak_ = std::max(peak_, resident_);
    return Hold(this, words);
}

}  // namespace ca
