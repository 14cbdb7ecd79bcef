#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "stdown/eval/evalsuite.hpp"
#include "stdown/eval/relgen.hpp"
#include "stdown/eval/tch.hpp"
#include "stdown/util/rng.hpp"

using namespace stdown;
using namespace stdown::eval;

namespace {

// independent oracle: textbook translation of the four formulas with
// long double accumulation
struct Oracle {
    long double r, bias, rmse, ubrmse;
};

Oracle brute_force(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const long double mx = sx / static_cast<long double>(n);
    const long double my = sy / static_cast<long double>(n);
    long double se = 0, sb = 0, su = 0, cxy = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        se += (static_cast<long double>(x[i]) - y[i]) * (static_cast<long double>(x[i]) - y[i]);
        sb += static_cast<long double>(x[i]) - y[i];
        const long double dx = x[i] - mx, dy = y[i] - my;
        su += (dx - dy) * (dx - dy);
        cxy += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    Oracle o;
    o.rmse = std::sqrt(se / n);
    o.bias = sb / n;
    o.ubrmse = std::sqrt(su / n);
    o.r = cxy / std::sqrt(vx * vy);
    return o;
}

}  // namespace

TEST_CASE("metrics hand examples") {
    auto ident = metrics({1, 2, 3}, {1, 2, 3});
    CHECK(*ident.r == doctest::Approx(1.0));
    CHECK(*ident.bias == 0.0);
    CHECK(*ident.rmse == 0.0);
    CHECK(*ident.ubrmse == 0.0);

    auto offset = metrics({2, 3, 4}, {1, 2, 3});
    CHECK(*offset.bias == doctest::Approx(1.0));
    CHECK(*offset.rmse == doctest::Approx(1.0));
    CHECK(*offset.ubrmse == doctest::Approx(0.0));
    CHECK(*offset.r == doctest::Approx(1.0));

    auto two = metrics({0, 0}, {3, 4});
    CHECK(*two.rmse == doctest::Approx(3.5355339059327378).epsilon(1e-14));
    CHECK(*two.bias == doctest::Approx(-3.5));
    CHECK(*two.ubrmse == doctest::Approx(0.5));
    CHECK(*two.rmse * *two.rmse ==
          doctest::Approx(*two.ubrmse * *two.ubrmse + *two.bias * *two.bias).epsilon(1e-12));

    auto r4 = metrics({1, 2, 3, 4}, {1, 2, 2, 4});
    CHECK(*r4.r == doctest::Approx(0.9233805168766388).epsilon(1e-12));

    // below minimum sample counts: absent, not zero
    auto one = metrics({2.0}, {1.5});
    CHECK(one.bias.has_value());
    CHECK(one.rmse.has_value());
    CHECK_FALSE(one.r.has_value());
    CHECK_FALSE(one.ubrmse.has_value());
    auto empty = metrics({}, {});
    CHECK_FALSE(empty.bias.has_value());

    // zero variance: R absent
    auto flat = metrics({1, 1, 1}, {1, 2, 3});
    CHECK_FALSE(flat.r.has_value());
}

TEST_CASE("metrics match the brute-force oracle on random masked pairs") {
    util::Rng rng(101);
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 3 + rng.next_below(60);
        std::vector<double> x(n), y(n);
        std::vector<std::uint8_t> xm(n), ym(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(0.0, 0.6);
            y[i] = rng.uniform(0.0, 0.6);
            xm[i] = rng.next_double() < 0.8;
            ym[i] = rng.next_double() < 0.8;
        }
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < n; ++i)
            if (xm[i] && ym[i]) {
                xs.push_back(x[i]);
                ys.push_back(y[i]);
            }
        const auto rep = metrics_masked(x, xm, y, ym);
        REQUIRE(rep.n == static_cast<std::int64_t>(xs.size()));
        if (xs.size() < 2) continue;
        const auto oracle = brute_force(xs, ys);
        CHECK(std::fabs(*rep.rmse - static_cast<double>(oracle.rmse)) < 1e-12);
        CHECK(std::fabs(*rep.bias - static_cast<double>(oracle.bias)) < 1e-12);
        CHECK(std::fabs(*rep.ubrmse - static_cast<double>(oracle.ubrmse)) < 1e-12);
        if (rep.r) CHECK(std::fabs(*rep.r - static_cast<double>(oracle.r)) < 1e-12);
        // identity rmse^2 = ubrmse^2 + bias^2
        CHECK(std::fabs(*rep.rmse * *rep.rmse - (*rep.ubrmse * *rep.ubrmse + *rep.bias * *rep.bias)) <
              1e-10);
    }
}

TEST_CASE("R is affine-invariant with positive slope and flips sign under negative slope") {
    util::Rng rng(102);
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        x[i] = rng.uniform(0.0, 1.0);
        y[i] = 0.4 * x[i] + rng.uniform(-0.2, 0.2);
    }
    const double r0 = *metrics(x, y).r;
    std::vector<double> y_pos(40), y_neg(40);
    for (std::size_t i = 0; i < 40; ++i) {
        y_pos[i] = 2.5 * y[i] + 0.7;
        y_neg[i] = -1.5 * y[i] + 0.2;
    }
    CHECK(*metrics(x, y_pos).r == doctest::Approx(r0).epsilon(1e-12));
    CHECK(*metrics(x, y_neg).r == doctest::Approx(-r0).epsilon(1e-12));
}

TEST_CASE("validate_vs_coarse: cell-constant upsampling recovers pooled R = 1") {
    geo::GeoGrid coarse{30.15, 85.15, 0.3, 0.3, 4, 4};
    geo::GeoGrid fine{30.05, 85.05, 0.1, 0.1, 12, 12};
    geo::TargetField truth;
    truth.grid = coarse;
    truth.times = {0, 10800, 21600};
    truth.allocate();
    geo::TargetField product;
    product.grid = fine;
    product.times = truth.times;
    product.allocate();

    util::Rng rng(103);
    for (auto& v : truth.values) v = rng.uniform(0.05, 0.55);
    for (std::int64_t t = 0; t < 3; ++t)
        for (std::int64_t i = 0; i < 12; ++i)
            for (std::int64_t j = 0; j < 12; ++j)
                product.values[static_cast<std::size_t>(product.idx(t, i, j))] =
                    truth.values[static_cast<std::size_t>(truth.idx(t, i / 3, j / 3))];

    const auto v = validate_vs_coarse(product, truth);
    CHECK(v.shared_timestamps == 3);
    CHECK(*v.pooled.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*v.pooled.rmse == doctest::Approx(0.0).epsilon(1e-12));
    for (std::int64_t p = 0; p < 16; ++p) {
        CHECK(v.r_map.mask[static_cast<std::size_t>(p)] == 1);
        CHECK(v.r_map.values[static_cast<std::size_t>(p)] == doctest::Approx(1.0).epsilon(1e-9));
    }

    geo::TargetField disjoint = truth;
    disjoint.times = {99999};
    disjoint.values.resize(16);
    disjoint.mask.assign(16, 1);
    CHECK_THROWS_AS(validate_vs_coarse(product, disjoint), std::invalid_argument);
}

TEST_CASE("validate_vs_stations: exact match, quality filtering, skip reporting") {
    geo::GeoGrid grid{30.05, 85.05, 0.1, 0.1, 10, 10};
    geo::TargetField product;
    product.grid = grid;
    // June 2017: inside the April-November season window
    for (int t = 0; t < 40; ++t) product.times.push_back(1496275200 + t * geo::kTimeStepSeconds);
    product.allocate();
    util::Rng rng(104);
    for (auto& v : product.values) v = rng.uniform(0.05, 0.55);

    geo::StationRecord match{"net1_a", 30.25, 85.35, 2.0, {}};
    const auto cell = geo::cell_index(grid, match.lat, match.lon);
    for (std::size_t t = 0; t < product.times.size(); ++t)
        match.series.push_back(
            {product.times[t],
             product.values[static_cast<std::size_t>(static_cast<std::int64_t>(t) * 100 + cell)],
             "good"});

    geo::StationRecord bad_quality{"net1_b", 30.85, 85.85, 2.0, {}};
    for (std::size_t t = 0; t < product.times.size(); ++t)
        bad_quality.series.push_back({product.times[t], 0.3, "bad"});

    geo::StationRecord deep{"net2_c", 30.45, 85.45, 10.0, {}};
    deep.series.push_back({product.times[0], 0.2, "good"});

    const auto v = validate_vs_stations(product, {match, bad_quality, deep});
    REQUIRE(v.per_station.size() == 1);
    CHECK(v.per_station[0].id == "net1_a");
    CHECK(v.per_station[0].network == "net1");
    CHECK(*v.per_station[0].report.r == doctest::Approx(1.0));
    CHECK(*v.per_station[0].report.rmse == doctest::Approx(0.0));
    CHECK(v.per_network.count("net1") == 1);
    CHECK(v.skipped.size() == 2);
}

TEST_CASE("relgen hand examples and the all-equal case") {
    std::map<int, MetricsReport> by_hour;
    for (int h : {0, 3, 6, 9, 12, 15, 18, 21}) {
        MetricsReport m;
        m.n = 100;
        m.r = 0.8;
        m.ubrmse = 0.10;
        by_hour[h] = m;
    }
    // X6=0.8, X18=0.9 -> baseline 0.85
    by_hour[18].r = 0.9;
    auto table = relgen(by_hour);
    CHECK(*table.baseline_r == doctest::Approx(0.85));

    // RE_R: baseline 0.8, hour value 0.76 -> -5%
    for (int h : {0, 3, 6, 9, 12, 15, 18, 21}) by_hour[h].r = 0.8;
    for (std::size_t k = 0; k < RETable::kHours.size(); ++k) by_hour[RETable::kHours[k]].r = 0.76;
    // RE_ubRMSE: baseline 0.10, hour value 0.09 -> +10%
    for (std::size_t k = 0; k < RETable::kHours.size(); ++k)
        by_hour[RETable::kHours[k]].ubrmse = 0.09;
    table = relgen(by_hour);
    for (std::size_t k = 0; k < RETable::kHours.size(); ++k) {
        CHECK(*table.re_r[k] == doctest::Approx(-0.05).epsilon(1e-12));
        CHECK(*table.re_ubrmse[k] == doctest::Approx(0.10).epsilon(1e-12));
    }
    CHECK(*table.mean_re_r == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(*table.mean_re_ubrmse == doctest::Approx(0.10).epsilon(1e-12));

    // all hours equal to the baseline: every RE is zero
    for (int h : {0, 3, 6, 9, 12, 15, 18, 21}) {
        by_hour[h].r = 0.8;
        by_hour[h].ubrmse = 0.10;
    }
    table = relgen(by_hour);
    CHECK(*table.mean_re_r == doctest::Approx(0.0));
    CHECK(*table.mean_re_ubrmse == doctest::Approx(0.0));

    // zero baseline: undefined, reported absent
    for (int h : {6, 18}) by_hour[h].r = 0.0;
    table = relgen(by_hour);
    CHECK_FALSE(table.re_r[0].has_value());
    CHECK_FALSE(table.mean_re_r.has_value());

    by_hour.erase(6);
    CHECK_THROWS_AS(relgen(by_hour), std::invalid_argument);
}

TEST_CASE("tch: identical series give zeros; two identical plus one noisy") {
    std::vector<double> s(200);
    util::Rng rng(105);
    for (auto& v : s) v = rng.uniform(0.1, 0.5);
    auto zero = tch({s, s, s});
    CHECK(zero.closed_form);
    for (double v : zero.variance) CHECK(v == 0.0);

    std::vector<double> noisy = s;
    const double sd = 0.05;
    for (auto& v : noisy) v += sd * rng.next_normal();
    auto res = tch({s, s, noisy});
    CHECK(res.variance[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.variance[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.variance[2] == doctest::Approx(sd * sd).epsilon(0.25));
}

TEST_CASE("tch: permuted products give permuted variances (closed form)") {
    util::Rng rng(106);
    const std::size_t n = 4000;
    std::vector<double> sig(n);
    for (auto& v : sig) v = 0.3 + 0.1 * rng.next_normal();
    std::vector<std::vector<double>> prod(3, sig);
    const double sds[3] = {0.01, 0.02, 0.03};
    for (int k = 0; k < 3; ++k)
        for (auto& v : prod[static_cast<std::size_t>(k)]) v += sds[k] * rng.next_normal();

    const auto direct = tch({prod[0], prod[1], prod[2]});
    const auto permuted = tch({prod[2], prod[0], prod[1]});
    CHECK(direct.variance[0] == doctest::Approx(permuted.variance[1]).epsilon(1e-12));
    CHECK(direct.variance[1] == doctest::Approx(permuted.variance[2]).epsilon(1e-12));
    CHECK(direct.variance[2] == doctest::Approx(permuted.variance[0]).epsilon(1e-12));
}

TEST_CASE("tch: four-product least squares recovers planted noise") {
    util::Rng rng(107);
    const std::size_t n = 20000;
    std::vector<double> sig(n);
    for (auto& v : sig) v = 0.3 + 0.1 * rng.next_normal();
    const double sds[4] = {0.01, 0.02, 0.03, 0.015};
    std::vector<std::vector<double>> prod(4, sig);
    for (int k = 0; k < 4; ++k)
        for (auto& v : prod[static_cast<std::size_t>(k)]) v += sds[k] * rng.next_normal();
    const auto res = tch(prod);
    CHECK_FALSE(res.closed_form);
    for (int k = 0; k < 4; ++k)
        CHECK(std::sqrt(res.variance[static_cast<std::size_t>(k)]) ==
              doctest::Approx(sds[k]).epsilon(0.2));
    CHECK_THROWS_AS(tch({sig, sig}), std::invalid_argument);
}

TEST_CASE("tch_maps: per-cell estimates, sample floor, daily-mean ordering") {
    util::Rng rng(108);
    geo::GeoGrid grid{30.0, 85.0, 1.0, 1.0, 3, 3};
    const std::int64_t T = 400;
    std::vector<geo::TargetField> prods(3);
    std::vector<double> sig(static_cast<std::size_t>(T * 9));
    for (auto& v : sig) v = 0.3 + 0.08 * rng.next_normal();
    const double sds[3] = {0.01, 0.02, 0.03};
    for (int k = 0; k < 3; ++k) {
        prods[static_cast<std::size_t>(k)].grid = grid;
        for (std::int64_t t = 0; t < T; ++t)
            prods[static_cast<std::size_t>(k)].times.push_back(t * geo::kTimeStepSeconds);
        prods[static_cast<std::size_t>(k)].allocate();
        for (std::size_t i = 0; i < sig.size(); ++i)
            prods[static_cast<std::size_t>(k)].values[i] = sig[i] + sds[k] * rng.next_normal();
    }
    // one cell too sparse to estimate
    for (std::int64_t t = 0; t < T - 10; ++t) prods[0].mask[static_cast<std::size_t>(t * 9 + 4)] = 0;

    const auto maps3h = tch_maps(prods, 30, false);
    REQUIRE(maps3h.size() == 3);
    CHECK(maps3h[0].mask[4] == 0);
    CHECK(maps3h[0].mask[0] == 1);
    CHECK(std::sqrt(maps3h[2].values[0]) == doctest::Approx(0.03).epsilon(0.35));

    const auto daily = tch_maps(prods, 30, true);
    // averaging independent noise within days reduces its variance
    double sum3h = 0.0, sumd = 0.0;
    int cnt = 0;
    for (std::int64_t p = 0; p < 9; ++p) {
        if (!maps3h[2].mask[static_cast<std::size_t>(p)] || !daily[2].mask[static_cast<std::size_t>(p)])
            continue;
        sum3h += maps3h[2].values[static_cast<std::size_t>(p)];
        sumd += daily[2].values[static_cast<std::size_t>(p)];
        ++cnt;
    }
    REQUIRE(cnt > 0);
    CHECK(sumd < sum3h);
}
