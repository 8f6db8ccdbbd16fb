#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ca {

struct CombineStep {
    std::vector<std::size_t> participants;  // stacking order
    std::size_t survivor = 0;               // must be one of the participants
    bool operator==(const CombineStep&) const = default;
};

struct ReductionTree {
    std::size_t leaf_count = 0;
    std::vector<std::vector<CombineStep>> levels;

    std::size_t root() const;
    std::size_t step_count() const;
    bool operator==(const ReductionTree&) const = default;
};

struct TreeShape {
    enum class Kind { flat, binary, qary, custom };
    Kind kind = Kind::binary;
    std::size_t q = 2;
    std::string custom_text;  // levels in the text format, for Kind::custom

    static TreeShape flat() { return {Kind::flat, 2, {}}; }
    static TreeShape binary() { return {Kind::binary, 2, {}}; }
    static TreeShape qary(std::size_t q);
    // "flat", "binary", "qary:Q"
    static TreeShape parse(const std::string& s);
    std::string name() const;
};

ReductionTree make_tree(const TreeShape& shape, std::size_t P);
// Each of `procs` processors reduces its own blocks with a flat chain, then
// the processors combine over a binary tree. Leaf ids are proc*blocks + k.
ReductionTree make_hybrid_tree(std::size_t procs, std::size_t blocks_per_proc);

// Throws ShapeError describing the first violated rule.
void validate(const ReductionTree& tree);
bool is_valid(const ReductionTree& tree);

std::size_t critical_path_length(const ReductionTree& tree);

// One line per level, steps written "(a,b,...)->s" separated by spaces.
std::string format_tree(const ReductionTree& tree);
ReductionTree parse_tree(const std::string& text, std::size_t leaf_count);

}  // namespace ca
