#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ca/matrix.hpp"

namespace ca {

enum class Direction { read, write };

struct Transfer {
    Direction direction = Direction::read;
    std::size_t words = 0;
    bool operator==(const Transfer&) const = default;
};

struct TransferCounters {
    std::size_t messages = 0;
    std::size_t words = 0;
    TransferCounters& operator+=(const TransferCounters& o) {
        messages += o.messages;
        words += o.words;
        return *this;
    }
    bool operator==(const TransferCounters&) const = default;
};

struct Backend {
    enum class Kind { memory, file };
    Kind kind = Kind::memory;
    std::string path;

    static Backend memory() { return {}; }
    static Backend file(std::string p) { return {Kind::file, std::move(p)}; }
    // "memory" or "file:<path>"
    static Backend parse(const std::string& s);
};

// Word-addressed slow memory. Offsets count doubles after the header.
class SlowStorage {
public:
    virtual ~SlowStorage() = default;
    virtual void read(std::size_t offset, std::size_t count, double* out) = 0;
    virtual void write(std::size_t offset, std::size_t count, const double* in) = 0;
};

// Which part of a tile a transfer moves. Triangles are taken per column of the
// tile: lower_with_diag moves rows j.., strict_lower rows j+1.., upper rows 0..j.
enum class Part { full, lower_with_diag, strict_lower, upper };

std::size_t region_words(std::size_t rows, std::size_t cols, Part part);

// A matrix kept in slow memory as a grid of row_blocks x col_blocks tiles.
// Rows are zero-padded up to a multiple of block_rows; the last tile column may
// be narrower. Every read/write of a tile (or part of one) is one logged
// message. A store with a tau trailer holds a Householder factor per tile:
// Y in the tile, tau in col_width(J) extra words.
class BlockStore {
public:
    static BlockStore create(const DenseMatrix& A, std::size_t block_rows, const Backend& backend);
    static BlockStore create_2d(const DenseMatrix& A, std::size_t block_rows, std::size_t col_blocks,
                                const Backend& backend);
    // Zero-filled store. Two-dimensional when col_blocks > 1 or two_d is set.
    static BlockStore empty(std::size_t m, std::size_t n, std::size_t block_rows, std::size_t col_blocks,
                            bool tau_trailer, const Backend& backend, bool two_d = false);
    static BlockStore open(const std::string& path);

    BlockStore(BlockStore&&) noexcept;
    BlockStore& operator=(BlockStore&&) noexcept;
    ~BlockStore();

    std::size_t m() const { return m_; }
    std::size_t n() const { return n_; }
    std::size_t block_rows() const { return block_rows_; }
    std::size_t row_blocks() const { return row_blocks_; }
    std::size_t col_blocks() const { return col_blocks_; }
    std::size_t block_cols() const { return block_cols_; }
    std::size_t col_width(std::size_t J) const;
    std::size_t padding() const { return row_blocks_ * block_rows_ - m_; }
    bool has_tau() const { return tau_; }
    const Backend& backend() const { return backend_; }

    DenseMatrix read_block(std::size_t i) { return read_tile(i, 0, Part::full); }
    void write_block(std::size_t i, const DenseMatrix& B) { write_tile(i, 0, B, Part::full); }

    // Returned tile is block_rows x col_width(J) with untouched entries zero.
    DenseMatrix read_tile(std::size_t I, std::size_t J, Part part = Part::full);
    void write_tile(std::size_t I, std::size_t J, const DenseMatrix& B, Part part = Part::full);

    std::pair<DenseMatrix, std::vector<double>> read_factor(std::size_t I, std::size_t J, Part part);
    void write_factor(std::size_t I, std::size_t J, const DenseMatrix& Y, const std::vector<double>& tau,
                      Part part);

    const std::vector<Transfer>& transfer_log() const { return log_; }
    TransferCounters counters() const;
    TransferCounters counters(Direction d) const;
    // Totals over log entries [start, end).
    TransferCounters counters_since(std::size_t start) const;
    void clear_log() { log_.clear(); }

    // Whole logical matrix, bypassing the log. For inspection and tests.
    DenseMatrix snapshot();
    // Unlogged variants of read_tile/read_factor, for verification only.
    DenseMatrix peek_tile(std::size_t I, std::size_t J);
    std::pair<DenseMatrix, std::vector<double>> peek_factor(std::size_t I, std::size_t J);

private:
    BlockStore() = default;
    void init(std::size_t m, std::size_t n, std::size_t br, std::size_t cb, bool tau, bool two_d,
              const Backend& backend);
    std::size_t tile_offset(std::size_t I, std::size_t J) const;
    void check_tile(std::size_t I, std::size_t J) const;
    std::vector<std::uint64_t> header() const;
    void transfer(Direction d, std::size_t I, std::size_t J, DenseMatrix& tile, std::vector<double>* tau,
                  Part part, bool log);

    std::size_t m_ = 0, n_ = 0, block_rows_ = 1, row_blocks_ = 0, col_blocks_ = 1, block_cols_ = 0;
    bool tau_ = false, two_d_ = false;
    Backend backend_;
    std::unique_ptr<SlowStorage> slow_;
    std::vector<Transfer> log_;
};

// Fast-memory residency tracker. hold() reserves words until the returned
// handle goes out of scope; exceeding the capacity throws.
class FastMemory {
public:
    class Hold {
    public:
        Hold() = default;
        Hold(FastMemory* fm, std::size_t w) : fm_(fm), words_(w) {}
        Hold(Hold&& o) noexcept : fm_(o.fm_), words_(o.words_) { o.fm_ = nullptr; }
        Hold& operator=(Hold&& o) noexcept;
        ~Hold() { release(); }
        void release();
        std::size_t words() const { return words_; }

    private:
        FastMemory* fm_ = nullptr;
        std::size_t words_ = 0;
    };

    explicit FastMemory(std::size_t capacity) : capacity_(capacity) {}
    [[nodiscard]] Hold hold(std::size_t words);
    std::size_t capacity() const { return capacity_; }
    std::size_t resident() const { return resident_; }
    std::size_t peak() const { return peak_; }

private:
    std::size_t capacity_;
    std::size_t resident_ = 0;
    std::size_t peak_ = 0;
};

}  // namespace ca
