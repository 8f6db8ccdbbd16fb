#include "ca/tree.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "ca/matrix.hpp"

namespace ca {

std::size_t ReductionTree::root() const {
    if (levels.empty()) return 0;
    return levels.back().back().survivor;
}

std::size_t ReductionTree::step_count() const {
    std::size_t s = 0;
    for (const auto& l : levels) s += l.size();
    return s;
}

TreeShape TreeShape::qary(std::size_t q) {
    if (q < 2) throw ShapeError("q-ary tree needs q >= 2");
    return {Kind::qary, q, {}};
}

TreeShape TreeShape::parse(const std::string& s) {
    if (s == "flat") return flat();
    if (s == "binary") return binary();
    if (s.rfind("qary:", 0) == 0) {
        std::size_t q = 0;
        const char* b = s.data() + 5;
        const char* e = s.data() + s.size();
        auto [p, ec] = std::from_chars(b, e, q);
        if (ec != std::errc{} || p != e) throw ShapeError("bad tree shape '" + s + "'");
        return qary(q);
    }
    throw ShapeError("unknown tree shape '" + s + "' (flat, binary, qary:Q)");
}

std::string TreeShape::name() const {
    switch (kind) {
        case Kind::flat: return "flat";
        case Kind::binary: return "binary";
        case Kind::qary: return "qary:" + std::to_string(q);
        case Kind::custom: return "custom";
    }
    return "?";
}

namespace {

// Group the live ids into consecutive runs of q; singleton runs wait.
std::vector<CombineStep> group_level(std::vector<std::size_t>& live, std::size_t q) {
    std::vector<CombineStep> level;
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < live.size(); i += q) {
        std::size_t end = std::min(live.size(), i + q);
        next.push_back(live[i]);
        if (end - i < 2) continue;
        CombineStep s;
        s.participants.assign(live.begin() + static_cast<long>(i), live.begin() + static_cast<long>(end));
        s.survivor = live[i];
        level.push_back(std::move(s));
    }
    live = std::move(next);
    return level;
}

}  // namespace

ReductionTree make_tree(const TreeShape& shape, std::size_t P) {
    if (P == 0) throw ShapeError("reduction tree needs at least one leaf");
    ReductionTree t;
    t.leaf_count = P;
    switch (shape.kind) {
        case TreeShape::Kind::flat:
            for (std::size_t i = 1; i < P; ++i) t.levels.push_back({CombineStep{{0, i}, 0}});
            break;
        case TreeShape::Kind::binary:
        case TreeShape::Kind::qary: {
            const std::size_t q = shape.kind == TreeShape::Kind::binary ? 2 : shape.q;
            if (q < 2) throw ShapeError("q-ary tree needs q >= 2");
            std::vector<std::size_t> live(P);
            for (std::size_t i = 0; i < P; ++i) live[i] = i;
            while (live.size() > 1) t.levels.push_back(group_level(live, q));
            break;
        }
        case TreeShape::Kind::custom:
            t = parse_tree(shape.custom_text, P);
            break;
    }
    validate(t);
    return t;
}

ReductionTree make_hybrid_tree(std::size_t procs, std::size_t blocks) {
    if (procs == 0 || blocks == 0) throw ShapeError("hybrid tree needs procs, blocks >= 1");
    ReductionTree t;
    t.leaf_count = procs * blocks;
    for (std::size_t k = 1; k < blocks; ++k) {
        std::vector<CombineStep> level;
        for (std::size_t p = 0; p < procs; ++p) level.push_back({{p * blocks, p * blocks + k}, p * blocks});
        t.levels.push_back(std::move(level));
    }
    std::vector<std::size_t> live(procs);
    for (std::size_t p = 0; p < procs; ++p) live[p] = p * blocks;
    while (live.size() > 1) t.levels.push_back(group_level(live, 2));
    validate(t);
    return t;
}

void validate(const ReductionTree& t) {
    if (t.leaf_count == 0) throw ShapeError("tree has no leaves");
    std::vector<char> alive(t.leaf_count, 1);
    for (std::size_t l = 0; l < t.levels.size(); ++l) {
        if (t.levels[l].empty()) throw ShapeError("level " + std::to_string(l) + " is empty");
        std::set<std::size_t> seen;
        for (const auto& s : t.levels[l]) {
            if (s.participants.size() < 2)
                throw ShapeError("step at level " + std::to_string(l) + " has fewer than two participants");
            for (auto id : s.participants) {
                if (id >= t.leaf_count) throw ShapeError("node " + std::to_string(id) + " out of range");
                if (!alive[id]) throw ShapeError("node " + std::to_string(id) + " reused after being consumed");
                if (!seen.insert(id).second)
                    throw ShapeError("node " + std::to_string(id) + " appears twice in level " + std::to_string(l));
            }
            if (std::find(s.participants.begin(), s.participants.end(), s.survivor) == s.participants.end())
                throw ShapeError("survivor " + std::to_string(s.survivor) + " is not a participant");
        }
        for (const auto& s : t.levels[l])
            for (auto id : s.participants)
                if (id != s.survivor) alive[id] = 0;
    }
    auto left = std::count(alive.begin(), alive.end(), 1);
    if (left != 1) throw ShapeError("tree leaves " + std::to_string(left) + " roots");
}

bool is_valid(const ReductionTree& t) {
    try {
        validate(t);
        return true;
    } catch (const ShapeError&) {
        return false;
    }
}

std::size_t critical_path_length(const ReductionTree& t) {
    std::vector<std::size_t> depth(t.leaf_count, 0);
    for (const auto& level : t.levels)
        for (const auto& s : level) {
            std::size_t d = 0;
            for (auto id : s.participants) d = std::max(d, depth[id]);
            depth[s.survivor] = d + 1;
        }
    return t.leaf_count ? depth[t.root()] : 0;
}

std::string format_tree(const ReductionTree& t) {
    std::ostringstream os;
    for (const auto& level : t.levels) {
        bool first = true;
        for (const auto& s : level) {
            if (!first) os << ' ';
            first = false;
            os << '(';
            for (std::size_t i = 0; i < s.participants.size(); ++i) os << (i ? "," : "") << s.participants[i];
            os << ")->" << s.survivor;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::size_t parse_id(std::string_view s, const std::string& tok) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) throw ShapeError("bad tree step '" + tok + "'");
    return v;
}

}  // namespace

ReductionTree parse_tree(const std::string& text, std::size_t leaf_count) {
    ReductionTree t;
    t.leaf_count = leaf_count;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        std::vector<CombineStep> level;
        while (ls >> tok) {
            auto close = tok.find(")->");
            if (tok.front() != '(' || close == std::string::npos) throw ShapeError("bad tree step '" + tok + "'");
            CombineStep s;
            std::string_view body(tok.data() + 1, close - 1);
            while (!body.empty()) {
                auto comma = body.find(',');
                s.participants.push_back(parse_id(body.substr(0, comma), tok));
                if (comma == std::string_view::npos) break;
                body.remove_prefix(comma + 1);
            }
            s.survivor = parse_id(std::string_view(tok).substr(close + 3), tok);
            level.push_back(std::move(s));
        }
        if (!level.empty()) t.levels.push_back(std::move(level));
    }
    validate(t);
    return t;
}

}  // namespace ca
