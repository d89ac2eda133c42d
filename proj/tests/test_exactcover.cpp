#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vflrecon/exactcover.hpp"

using namespace vflrecon;
using namespace vflrecon::exactcover;

TEST_CASE("brute force finds the hand-built cover") {
    ExactCoverInstance inst;
    inst.n = 4;
    inst.subsets = {{0, 1}, {2, 3}, {1, 2}};
    auto res = brute_force_cover(inst);
    REQUIRE(res.covered);
    CHECK(*res.cover == std::vector<int>{0, 1});
}

TEST_CASE("brute force reports an uncoverable instance") {
    ExactCoverInstance inst;
    inst.n = 3;
    inst.subsets = {{0, 1}, {1, 2}};
    auto res = brute_force_cover(inst);
    CHECK_FALSE(res.covered);
    CHECK_FALSE(res.cover.has_value());
}

TEST_CASE("a single subset equal to the universe is a cover") {
    ExactCoverInstance inst;
    inst.n = 3;
    inst.subsets = {{0, 2}, {0, 1, 2}};
    auto res = brute_force_cover(inst);
    REQUIRE(res.covered);
    CHECK(*res.cover == std::vector<int>{1});
}

TEST_CASE("overlap forbids reusing an element") {
    // {0,1} + {1,2} covers everything but hits 1 twice.
    ExactCoverInstance inst;
    inst.n = 3;
    inst.subsets = {{0, 1}, {1, 2}, {2}};
    auto res = brute_force_cover(inst);
    REQUIRE(res.covered);
    CHECK(*res.cover == std::vector<int>{0, 2});
}

TEST_CASE("verify_cover agrees with the definition") {
    ExactCoverInstance inst;
    inst.n = 4;
    inst.subsets = {{0, 1}, {2, 3}, {1, 2}, {3}};
    CHECK(verify_cover(inst, {0, 1}));
    CHECK(verify_cover(inst, {1, 0}));  // order does not matter
    CHECK_FALSE(verify_cover(inst, {0}));         // misses elements
    CHECK_FALSE(verify_cover(inst, {0, 1, 3}));   // double-covers 3
    CHECK_FALSE(verify_cover(inst, {0, 9}));      // bad index
    CHECK_FALSE(verify_cover(inst, {}));
}

TEST_CASE("every brute-force cover verifies (property)") {
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto inst = random_instance(5, 5, 0.4, seed);
        auto res = brute_force_cover(inst);
        if (res.covered) {
            ++covered;
            CHECK(verify_cover(inst, *res.cover));
        }
    }
    CHECK(covered > 0);
    CHECK(covered < 40);
}

TEST_CASE("random_instance is deterministic and well formed") {
    auto a = random_instance(8, 6, 0.3, 9);
    auto b = random_instance(8, 6, 0.3, 9);
    CHECK(a.subsets == b.subsets);
    CHECK(a.subsets.size() == 6);
    for (const auto& s : a.subsets) {
        CHECK_FALSE(s.empty());
        for (int e : s) {
            CHECK(e >= 0);
            CHECK(e < 8);
        }
    }
    CHECK_THROWS_AS(random_instance(5, 5, 0.0, 1), InvalidConfig);
    CHECK_THROWS_AS(random_instance(0, 5, 0.5, 1), InvalidConfig);
}

TEST_CASE("validate rejects malformed instances") {
    ExactCoverInstance inst;
    inst.n = 0;
    inst.subsets = {{0}};
    CHECK_THROWS_AS(inst.validate(), InvalidConfig);
    inst.n = 3;
    inst.subsets = {};
    CHECK_THROWS_AS(inst.validate(), InvalidConfig);
    inst.subsets = {{}};
    CHECK_THROWS_AS(inst.validate(), InvalidConfig);
    inst.subsets = {{3}};
    CHECK_THROWS_AS(inst.validate(), IndexOutOfRange);
}

TEST_CASE("brute force is capped") {
    ExactCoverInstance inst;
    inst.n = 2;
    inst.subsets.assign(23, {0});
    CHECK_THROWS_AS(brute_force_cover(inst), DimensionCap);
}

TEST_CASE("format/parse round-trip") {
    ExactCoverInstance inst;
    inst.n = 4;
    inst.subsets = {{0, 1}, {2, 3}, {1, 2}};
    auto text = format_instance(inst);
    CHECK(text == "4 3\n1 2\n3 4\n2 3\n");
    auto back = parse_instance(text);
    CHECK(back.n == 4);
    CHECK(back.subsets == inst.subsets);
}

TEST_CASE("parse_instance rejects malformed text") {
    CHECK_THROWS_AS(parse_instance(""), ParseError);
    CHECK_THROWS_AS(parse_instance("nonsense\n"), ParseError);
    CHECK_THROWS_AS(parse_instance("3 2\n1 2\n"), ParseError);
    CHECK_THROWS_AS(parse_instance("3 1\n1 9\n"), IndexOutOfRange);
}
