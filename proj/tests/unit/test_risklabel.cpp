#include <doctest.h>

#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/random.hpp"
#include "frisk/risklabel.hpp"
#include "helpers.hpp"

using namespace frisk;

namespace {

// Friend cluster 1 with one entry per stranger cluster; `significant`
// decides the group's F-test flag.
ImpactMatrix matrix(const std::vector<double>& values, const std::vector<bool>& significant) {
    ImpactMatrix m;
    for (std::size_t j = 0; j < values.size(); ++j) {
        const int sc = static_cast<int>(j) + 1;
        m.entries[{1, sc}] = {values[j], true};
        GroupDiagnostics g;
        g.significant = significant[j];
        g.f_pvalue = significant[j] ? 0.01 : 0.5;
        m.groups[sc] = g;
    }
    return m;
}

} // namespace

TEST_CASE("threshold boundaries") {
    CHECK(assign_friend_label(0.19) == FriendRisk::not_risky);
    CHECK(assign_friend_label(0.2) == FriendRisk::risky);
    CHECK(assign_friend_label(0.49) == FriendRisk::risky);
    CHECK(assign_friend_label(0.5) == FriendRisk::very_risky);
    CHECK(assign_friend_label(1.0) == FriendRisk::very_risky);
    CHECK(assign_friend_label(0.0) == FriendRisk::not_risky);
    CHECK_THROWS_AS(assign_friend_label(0.3, {0.5, 0.5}), Error);
    CHECK_THROWS_AS(assign_friend_label(0.3, {0.6, 0.5}), Error);
}

TEST_CASE("labels are monotone in the negative share") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double a = uniform01(rng), b = uniform01(rng);
        Thresholds t{0.1 + 0.3 * uniform01(rng), 0.5 + 0.5 * uniform01(rng)};
        const auto la = assign_friend_label(std::min(a, b), t);
        const auto lb = assign_friend_label(std::max(a, b), t);
        REQUIRE(static_cast<int>(la) <= static_cast<int>(lb));
    }
}

TEST_CASE("y above one disables very risky") {
    Thresholds t{0.2, 1.01};
    for (double v : {0.0, 0.5, 0.99, 1.0}) CHECK(assign_friend_label(v, t) != FriendRisk::very_risky);
}

TEST_CASE("sign percentages") {
    auto m = matrix({-0.3, 0.5, 0.2, -0.1}, {true, true, true, true});
    auto s = impact_sign_percentages(m, 1);
    REQUIRE(s);
    CHECK(s->im_minus == 0.5);
    CHECK(s->im_plus == 0.5);
    CHECK(s->n_significant == 4);

    auto pos = impact_sign_percentages(matrix({0.1, 0.0, 2.0}, {true, true, true}), 1);
    CHECK(pos->im_minus == 0.0);
    CHECK(pos->im_plus == 1.0);

    // Two of five entries sit in non-significant groups.
    auto mixed = impact_sign_percentages(matrix({-0.4, 0.3, -0.2, -0.9, 0.6}, {true, false, true, false, true}), 1);
    REQUIRE(mixed);
    CHECK(mixed->n_significant == 3);
    CHECK(mixed->im_minus == doctest::Approx(2.0 / 3.0));

    CHECK_FALSE(impact_sign_percentages(matrix({-0.4}, {false}), 1));
    CHECK_FALSE(impact_sign_percentages(m, 7));
}

TEST_CASE("non-estimable entries are ignored") {
    auto m = matrix({-0.4, 0.3}, {true, true});
    m.entries[{1, 1}].estimable = false;
    auto s = impact_sign_percentages(m, 1);
    CHECK(s->n_significant == 1);
    CHECK(s->im_minus == 0.0);
}

TEST_CASE("friend report gives every friend of a cluster its label") {
    ImpactMatrix m = matrix({-0.3, -0.5, 0.2}, {true, true, true});
    m.entries[{2, 1}] = {0.4, true};
    ClusterAssignment fc(SfmKind::friends, 3, {{"u", "a"}, {"u", "b"}, {"v", "a"}, {"v", "c"}}, {1, 2, 1, 3});
    auto r = build_friend_report(m, fc);
    REQUIRE(r.clusters.size() == 3);
    CHECK(r.cluster(1)->label == FriendRisk::very_risky);
    CHECK(r.cluster(2)->label == FriendRisk::not_risky);
    CHECK_FALSE(r.cluster(3)->label);
    REQUIRE(r.friends.size() == 4);
    for (const auto& f : r.friends) CHECK(f.label == r.cluster(f.friend_cluster)->label);

    auto back = report_from_json(report_to_json(r));
    CHECK(back.friends.size() == 4);
    CHECK(back.cluster(1)->label == FriendRisk::very_risky);
    CHECK_FALSE(back.cluster(3)->label);

    testing::TempDir dir("rl");
    write_report_csv(dir.file("c.csv"), dir.file("f.csv"), r);
    CHECK(io::read_text(dir.file("c.csv")).find("very risky") != std::string::npos);
    CHECK(io::read_text(dir.file("f.csv")).find("undetermined") != std::string::npos);
}
