#include <gtest/gtest.h>

#include "ca/matrix.hpp"
#include "ca/tree.hpp"

using ca::CombineStep;
using ca::TreeShape;

TEST(Trees, BinaryFour) {
    auto t = ca::make_tree(TreeShape::binary(), 4);
    ASSERT_EQ(t.levels.size(), 2u);
    EXPECT_EQ(t.levels[0], (std::vector<CombineStep>{{{0, 1}, 0}, {{2, 3}, 2}}));
    EXPECT_EQ(t.levels[1], (std::vector<CombineStep>{{{0, 2}, 0}}));
    EXPECT_EQ(t.root(), 0u);
}

TEST(Trees, FlatFour) {
    auto t = ca::make_tree(TreeShape::flat(), 4);
    ASSERT_EQ(t.step_count(), 3u);
    EXPECT_EQ(t.levels[0][0], (CombineStep{{0, 1}, 0}));
    EXPECT_EQ(t.levels[1][0], (CombineStep{{0, 2}, 0}));
    EXPECT_EQ(t.levels[2][0], (CombineStep{{0, 3}, 0}));
}

TEST(Trees, SingleLeaf) {
    auto t = ca::make_tree(TreeShape::binary(), 1);
    EXPECT_TRUE(t.levels.empty());
    EXPECT_EQ(t.root(), 0u);
    EXPECT_EQ(ca::critical_path_length(t), 0u);
}

TEST(Trees, RejectsZero) { EXPECT_THROW(ca::make_tree(TreeShape::binary(), 0), ca::ShapeError); }

TEST(Trees, CriticalPaths) {
    EXPECT_EQ(ca::critical_path_length(ca::make_tree(TreeShape::binary(), 8)), 3u);
    EXPECT_EQ(ca::critical_path_length(ca::make_tree(TreeShape::flat(), 5)), 4u);
    EXPECT_EQ(ca::critical_path_length(ca::make_tree(TreeShape::qary(4), 16)), 2u);
    for (std::size_t L = 0; L <= 10; ++L)
        EXPECT_EQ(ca::critical_path_length(ca::make_tree(TreeShape::binary(), std::size_t{1} << L)), L);
}

TEST(Trees, OddSurvivorPassesThrough) {
    auto t = ca::make_tree(TreeShape::binary(), 5);
    EXPECT_EQ(t.levels.size(), 3u);
    EXPECT_EQ(t.levels[0].size(), 2u);  // leaf 4 waits
    EXPECT_EQ(t.levels[2][0], (CombineStep{{0, 4}, 0}));
    ca::validate(t);
}

TEST(Trees, QaryRaggedGroup) {
    auto t = ca::make_tree(TreeShape::qary(3), 7);
    ca::validate(t);
    EXPECT_EQ(t.levels[0].size(), 2u);  // {0,1,2} {3,4,5}, 6 waits
    EXPECT_EQ(t.levels[1][0].participants, (std::vector<std::size_t>{0, 3, 6}));
}

TEST(Trees, ValidateAcceptsAllGenerated) {
    for (std::size_t P = 1; P <= 40; ++P) {
        for (auto s : {TreeShape::flat(), TreeShape::binary(), TreeShape::qary(3), TreeShape::qary(4)})
            EXPECT_TRUE(ca::is_valid(ca::make_tree(s, P))) << s.name() << " P=" << P;
    }
    EXPECT_TRUE(ca::is_valid(ca::make_hybrid_tree(4, 4)));
}

TEST(Trees, ValidateRejectsReuse) {
    auto t = ca::make_tree(TreeShape::binary(), 4);
    t.levels[1][0] = {{0, 1}, 0};  // 1 was consumed at level 0
    EXPECT_FALSE(ca::is_valid(t));

    auto f = ca::make_tree(TreeShape::flat(), 4);
    f.levels[2][0] = {{0, 0}, 0};
    EXPECT_FALSE(ca::is_valid(f));

    auto g = ca::make_tree(TreeShape::binary(), 4);
    g.levels[1][0].survivor = 3;  // not a participant
    EXPECT_FALSE(ca::is_valid(g));

    auto h = ca::make_tree(TreeShape::binary(), 4);
    h.levels.pop_back();  // two roots left
    EXPECT_FALSE(ca::is_valid(h));
}

TEST(Trees, HybridShape) {
    auto t = ca::make_hybrid_tree(4, 4);
    EXPECT_EQ(t.leaf_count, 16u);
    // three flat steps per processor, then two binary levels
    EXPECT_EQ(t.levels.size(), 5u);
    EXPECT_EQ(t.levels[0].size(), 4u);
    EXPECT_EQ(ca::critical_path_length(t), 5u);
}

TEST(Trees, TextRoundTrip) {
    auto t = ca::make_tree(TreeShape::qary(3), 10);
    auto text = ca::format_tree(t);
    EXPECT_EQ(ca::parse_tree(text, 10), t);
    auto b = ca::parse_tree("(0,1)->0 (2,3)->2\n(0,2)->0\n", 4);
    EXPECT_EQ(b, ca::make_tree(TreeShape::binary(), 4));
    EXPECT_THROW(ca::parse_tree("(0,1)->0 (0,2)->0\n", 3), ca::ShapeError);
    EXPECT_THROW(ca::parse_tree("(0,1)-0\n", 2), ca::ShapeError);
}

TEST(Trees, ShapeParsing) {
    EXPECT_EQ(TreeShape::parse("qary:4").q, 4u);
    EXPECT_EQ(TreeShape::parse("flat").kind, TreeShape::Kind::flat);
    EXPECT_THROW(TreeShape::parse("qary:1"), ca::ShapeError);
    EXPECT_THROW(TreeShape::parse("ternary"), ca::ShapeError);
}
