#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>

#include <doctest.h>

#include "amr/fixtures.hpp"
#include "amr/hungarian.hpp"
#include "amr/losses.hpp"

using namespace amr;

namespace {

NormalizedMoment bounds(double s, double e) { return NormalizedMoment::from_bounds(s, e); }

// Exhaustive minimum over all injections of N ground truths into K candidates.
struct BruteForce {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> cols;
};

void enumerate(const std::vector<double> &cost, std::size_t rows, std::size_t cols,
               std::vector<std::size_t> &picked, std::vector<bool> &used, BruteForce &best) {
    const std::size_t r = picked.size();
    if (r == rows) {
        double total = 0.0;
        for (std::size_t i = 0; i < rows; ++i) total += cost[i * cols + picked[i]];
        if (total < best.cost) {
            best.cost = total;
            best.cols = picked;
        }
        return;
    }
    for (std::size_t c = 0; c < cols; ++c) {
        if (used[c]) continue;
        used[c] = true;
        picked.push_back(c);
        enumerate(cost, rows, cols, picked, used, best);
        picked.pop_back();
        used[c] = false;
    }
}

BruteForce brute_force(const std::vector<double> &cost, std::size_t rows, std::size_t cols) {
    BruteForce best;
    std::vector<std::size_t> picked;
    std::vector<bool> used(cols, false);
    enumerate(cost, rows, cols, picked, used, best);
    return best;
}

std::vector<Candidate> random_candidates(std::mt19937_64 &rng, std::size_t k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = 0.02 + 0.6 * u(rng);
        out.push_back({{w / 2 + (1 - w) * u(rng), w}, u(rng)});
    }
    return out;
}

std::vector<NormalizedMoment> random_gts(std::mt19937_64 &rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<NormalizedMoment> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.05 + 0.4 * u(rng);
        out.push_back({w / 2 + (1 - w) * u(rng), w});
    }
    return out;
}

} // namespace

TEST_SUITE("losses") {

TEST_CASE("l1_loss examples") {
    CHECK(l1_loss(bounds(0.2, 0.6), bounds(0.2, 0.6)) == 0.0);
    CHECK(l1_loss(bounds(0.1, 0.5), bounds(0.2, 0.4)) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(l1_loss(bounds(0.0, 0.2), bounds(0.3, 0.5)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("l1_loss equals center plus width error") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const NormalizedMoment p{u(rng), u(rng)}, g{u(rng), u(rng)};
        REQUIRE(l1_loss(p, g) == doctest::Approx(std::abs(p.center - g.center) +
                                                 std::abs(p.width - g.width)));
    }
}

TEST_CASE("giou_loss examples") {
    CHECK(giou_loss(bounds(0.25, 0.75), bounds(0.25, 0.75)) == -1.0);
    CHECK(giou_loss(bounds(0.0, 0.2), bounds(0.4, 0.6)) == doctest::Approx(1.0 / 3.0));
    CHECK(giou_loss(bounds(0.0, 0.5), bounds(0.5, 1.0)) == 0.0);
    CHECK_THROWS_AS(giou_loss(bounds(0.1, 0.2), bounds(0.5, 0.5)), InvalidArgument);
}

TEST_CASE("negative predicted width collapses to the center") {
    const NormalizedMoment inverted{0.5, -0.2};
    // an empty interval at 0.5 inside [0.4, 0.6]: IoU 0, hull equals the gt
    CHECK(giou_loss(inverted, bounds(0.4, 0.6)) == doctest::Approx(0.0));
    // empty interval at 0.5 outside [0.0, 0.2]: hull 0.5, union 0.2
    CHECK(giou_loss(inverted, bounds(0.0, 0.2)) == doctest::Approx(0.6));
}

TEST_CASE("moment_loss examples") {
    const LossWeights w{10.0, 1.0, 4.0};
    CHECK(moment_loss(bounds(0.3, 0.6), bounds(0.3, 0.6), w) == doctest::Approx(-1.0));
    CHECK(moment_loss(bounds(0.3, 0.6), bounds(0.3, 0.6), {3.0, 2.5, 1.0}) ==
          doctest::Approx(-2.5));
    // L1 0.2 and touching intervals
    CHECK(moment_loss(bounds(0.3, 0.5), bounds(0.5, 0.7), w) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(moment_loss(bounds(0.1, 0.5), bounds(0.7, 0.9), {0.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("moment_loss lower bound is reached only at the ground truth") {
    std::mt19937_64 rng(17);
    const LossWeights w{10.0, 1.0, 4.0};
    const auto gts = random_gts(rng, 500);
    const auto preds = random_candidates(rng, 500);
    for (std::size_t i = 0; i < gts.size(); ++i) {
        REQUIRE(moment_loss(preds[i].moment, gts[i], w) > -w.lambda_giou);
        REQUIRE(moment_loss(gts[i], gts[i], w) == doctest::Approx(-w.lambda_giou));
    }
}

TEST_CASE("score_loss examples") {
    const std::vector<double> conf{0.8, 0.3};
    Assignment a;
    a.pairs = {{0, 0}};
    // -ln 0.8 - ln 0.7
    CHECK(std::abs(score_loss(conf, a) - 0.5798184952529422) < 1e-9);

    const std::vector<double> sure{1.0, 1.0};
    Assignment both;
    both.pairs = {{0, 0}, {1, 1}};
    CHECK(score_loss(sure, both) == doctest::Approx(2e-7).epsilon(1e-3));

    const std::vector<double> confident_miss{1.0};
    CHECK(score_loss(confident_miss, Assignment{}) == doctest::Approx(16.11809565095832));
}

TEST_CASE("score_loss is invariant to permuting unmatched candidates") {
    std::vector<double> conf{0.9, 0.1, 0.4, 0.7, 0.2};
    Assignment a;
    a.pairs = {{0, 0}};
    const double ref = score_loss(conf, a);
    std::sort(conf.begin() + 1, conf.end());
    do {
        REQUIRE(score_loss(conf, a) == doctest::Approx(ref).epsilon(1e-14));
    } while (std::next_permutation(conf.begin() + 1, conf.end()));
}

TEST_CASE("score_loss rejects malformed assignments") {
    const std::vector<double> conf{0.5, 0.5};
    Assignment out_of_range;
    out_of_range.pairs = {{2, 0}};
    CHECK_THROWS_AS(score_loss(conf, out_of_range), InvalidArgument);
    Assignment twice;
    twice.pairs = {{1, 0}, {1, 1}};
    CHECK_THROWS_AS(score_loss(conf, twice), InvalidArgument);
}

TEST_CASE("optimal_assignment small cases") {
    const LossWeights w;
    const std::vector<Candidate> preds{{bounds(0.2, 0.4), 0.9}, {bounds(0.7, 0.95), 0.1}};
    const std::vector<NormalizedMoment> gts{bounds(0.2, 0.4)};
    const Assignment a = optimal_assignment(preds, gts, w);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});

    const std::vector<Candidate> twins{{bounds(0.6, 0.8), 0.5}, {bounds(0.6, 0.8), 0.5}};
    const Assignment t = optimal_assignment(twins, gts, w);
    CHECK(t.pairs[0].first == 0);

    const std::vector<NormalizedMoment> too_many{bounds(0.1, 0.2), bounds(0.3, 0.4),
                                                 bounds(0.5, 0.6)};
    CHECK_THROWS_AS(optimal_assignment(preds, too_many, w), InvalidArgument);
    CHECK(optimal_assignment(preds, {}, w).pairs.empty());
}

TEST_CASE("lexicographic tie-break across several optimal assignments") {
    // Every row costs the same in every column.
    const std::vector<double> flat(3 * 5, 1.0);
    const auto cols = detail::lexicographic_min_assignment(flat, 3, 5);
    CHECK(cols == std::vector<std::size_t>{0, 1, 2});

    // Row 0 prefers 2 or 3 equally; row 1 is indifferent among 0..3.
    const std::vector<double> cost{5, 5, 1, 1, 0, 0, 0, 0};
    const auto picks = detail::lexicographic_min_assignment(cost, 2, 4);
    CHECK(picks == std::vector<std::size_t>{2, 0});
}

TEST_CASE("optimal_assignment matches exhaustive search") {
    std::mt19937_64 rng(2024);
    const LossWeights w;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 1 + rng() % 7;
        const std::size_t n = rng() % (k + 1);
        const auto preds = random_candidates(rng, k);
        const auto gts = random_gts(rng, n);
        const auto cost = matching_cost_matrix(preds, gts, w);
        const BruteForce best = brute_force(cost, n, k);
        const Assignment a = optimal_assignment(preds, gts, w);
        REQUIRE(a.pairs.size() == n);
        double total = 0.0;
        for (const auto &[c, r] : a.pairs) total += cost[r * k + c];
        if (n > 0) {
            REQUIRE(total == best.cost);
            for (std::size_t r = 0; r < n; ++r) REQUIRE(a.pairs[r].first == best.cols[r]);
        }
    }
}

TEST_CASE("optimal assignment beats sampled alternatives") {
    std::mt19937_64 rng(99);
    const LossWeights w;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 10, n = 1 + rng() % 4;
        const auto preds = random_candidates(rng, k);
        const auto gts = random_gts(rng, n);
        const Assignment best = optimal_assignment(preds, gts, w);
        const double best_cost = matching_objective(preds, gts, best, w);
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        for (int alt = 0; alt < 50; ++alt) {
            std::shuffle(perm.begin(), perm.end(), rng);
            Assignment other;
            for (std::size_t r = 0; r < n; ++r) other.pairs.emplace_back(perm[r], r);
            REQUIRE(best_cost <= matching_objective(preds, gts, other, w) + 1e-12);
        }
    }
}

TEST_CASE("hungarian solver on a rectangular matrix") {
    // rows pick distinct columns; optimum 1 + 2 = 3 via (0 -> 2, 1 -> 0)
    const std::vector<double> cost{4, 9, 1, 7, 2, 8, 6, 5};
    const auto cols = detail::min_cost_assignment(cost, 2, 4);
    CHECK(cols == std::vector<std::size_t>{2, 0});
    CHECK_THROWS(detail::min_cost_assignment(cost, 4, 2));
}

TEST_CASE("overall_loss examples") {
    const LossWeights w{10.0, 1.0, 4.0};
    const std::vector<Candidate> preds{{bounds(0.1, 0.3), 0.25}, {bounds(0.5, 0.9), 0.6}};
    const OverallLoss empty = overall_loss(preds, {}, w);
    CHECK(empty.assignment.pairs.empty());
    CHECK(empty.moment_term == 0.0);
    CHECK(empty.value == doctest::Approx(4.0 * (-std::log(0.75) - std::log(0.4))));

    // Perfect predictions, confident only on the matched ones.
    const std::vector<NormalizedMoment> gts{bounds(0.1, 0.3), bounds(0.5, 0.9)};
    const std::vector<Candidate> perfect{
        {bounds(0.5, 0.9), 1.0}, {bounds(0.0, 0.05), 0.0}, {bounds(0.1, 0.3), 1.0}};
    const OverallLoss p = overall_loss(perfect, gts, w);
    CHECK(p.value == doctest::Approx(-2.0).epsilon(1e-5));
    CHECK(p.assignment.pairs[0].first == 2);
    CHECK(p.assignment.pairs[1].first == 0);
}

TEST_CASE("overall_loss equals recomputed score and moment sums") {
    const LossWeights w{10.0, 1.0, 4.0};
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto preds = random_candidates(rng, 6);
        const auto gts = random_gts(rng, 1 + rng() % 3);
        const OverallLoss res = overall_loss(preds, gts, w);
        double expected = 0.0;
        std::vector<bool> matched(preds.size(), false);
        for (const auto &[k, n] : res.assignment.pairs) {
            matched[k] = true;
            expected += w.lambda_l1 * (std::abs(preds[k].moment.center - gts[n].center) +
                                       std::abs(preds[k].moment.width - gts[n].width));
            expected -= w.lambda_giou * giou({preds[k].moment.start(), preds[k].moment.end()},
                                             {gts[n].start(), gts[n].end()});
        }
        for (std::size_t k = 0; k < preds.size(); ++k) {
            const double c = preds[k].confidence;
            expected += w.lambda_score * (matched[k] ? -std::log(c) : -std::log(1.0 - c));
        }
        REQUIRE(res.value == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("golden loss fixtures") {
    const std::filesystem::path dir = std::filesystem::path(AMR_FIXTURE_DIR) / "losses";
    int count = 0;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        const LossFixture fx = read_loss_fixture(entry.path());
        CAPTURE(fx.name);
        REQUIRE(fx.expected_loss.has_value());
        const OverallLoss res = overall_loss(fx.preds, fx.gts, fx.weights);
        CHECK(std::abs(res.value - *fx.expected_loss) <= 1e-9);
        REQUIRE(fx.expected_assignment.has_value());
        CHECK(res.assignment == *fx.expected_assignment);
        ++count;
    }
    CHECK(count >= 4);
}

TEST_CASE("moment_loss_gradient matches central differences") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const LossWeights w{10.0, 1.0, 4.0};
    const double h = 1e-6;
    int checked = 0;
    while (checked < 500) {
        const NormalizedMoment gt{0.1 + 0.8 * u(rng), 0.05 + 0.3 * u(rng)};
        const NormalizedMoment p{u(rng), 0.02 + 0.5 * u(rng)};
        const MomentGradient g = moment_loss_gradient(p, gt, w);
        // skip pairs within reach of a kink for the difference stencil
        const double margin = 1e-4;
        const double ps = p.start(), pe = p.end(), gs = gt.start(), ge = gt.end();
        if (std::abs(p.center - gt.center) < margin || std::abs(p.width - gt.width) < margin ||
            std::abs(ps - gs) < margin || std::abs(pe - ge) < margin ||
            std::abs(pe - gs) < margin || std::abs(ps - ge) < margin) {
            continue;
        }
        REQUIRE_FALSE(g.near_kink);
        const double fc = (moment_loss({p.center + h, p.width}, gt, w) -
                           moment_loss({p.center - h, p.width}, gt, w)) / (2 * h);
        const double fw = (moment_loss({p.center, p.width + h}, gt, w) -
                           moment_loss({p.center, p.width - h}, gt, w)) / (2 * h);
        REQUIRE(std::abs(g.d_center - fc) <= 1e-4 * std::max(1.0, std::abs(fc)));
        REQUIRE(std::abs(g.d_width - fw) <= 1e-4 * std::max(1.0, std::abs(fw)));
        ++checked;
    }
}

TEST_CASE("moment_loss_gradient at the ground truth reports the right-hand derivative") {
    const LossWeights w{10.0, 1.0, 4.0};
    const NormalizedMoment gt{0.5, 0.4};
    const MomentGradient g = moment_loss_gradient(gt, gt, w);
    CHECK(g.near_kink);
    // widening past the ground truth: d/dw (-IoU) = 1/w, L1 slope +λ
    CHECK(g.d_width == doctest::Approx(10.0 + 1.0 / 0.4));
    const double h = 1e-7;
    const double forward = (moment_loss({0.5, 0.4 + h}, gt, w) - moment_loss(gt, gt, w)) / h;
    CHECK(g.d_width == doctest::Approx(forward).epsilon(1e-5));
    const double forward_c = (moment_loss({0.5 + h, 0.4}, gt, w) - moment_loss(gt, gt, w)) / h;
    CHECK(g.d_center == doctest::Approx(forward_c).epsilon(1e-5));
}

TEST_CASE("moment_loss_gradient with zero weights is zero") {
    const MomentGradient g = moment_loss_gradient({0.3, 0.2}, {0.6, 0.1}, {0.0, 0.0, 1.0});
    CHECK(g.d_center == 0.0);
    CHECK(g.d_width == 0.0);
}

} // TEST_SUITE
