#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "readyrules/ensemble.hpp"

using namespace readyrules;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double pi = std::numbers::pi;

// Everything that should coincide between a standard and an objective run
// of the same seed, which is everything except the rule tag on the events.
void check_same_statistics(const TrajectoryRecord& a, const TrajectoryRecord& b) {
    REQUIRE(a.seed == b.seed);
    CHECK(a.outcome == b.outcome);
    CHECK(a.t_sc == b.t_sc);
    CHECK(a.final_c == b.final_c);
    CHECK(a.final_s == b.final_s);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].chosen == b.events[i].chosen);
        CHECK(a.events[i].zeroed == b.events[i].zeroed);
        CHECK(a.events[i].via_masked_pair == b.events[i].via_masked_pair);
    }
}

double binomial_sigma(double w, long n) {
    return std::sqrt(w * (1.0 - w) / static_cast<double>(n));
}

} // namespace

TEST_CASE("ensembles are deterministic and thread count never changes results",
          "[ensemble]") {
    const Scenario sc = build("observer_on_board");
    const RuleMode mode;

    RunOptions opts;
    const auto once = run_trajectories(sc, mode, 200, 501, opts);
    const auto again = run_trajectories(sc, mode, 200, 501, opts);
    REQUIRE(once == again);

    opts.threads = 2;
    const auto pooled = run_trajectories(sc, mode, 200, 501, opts);
    REQUIRE(once == pooled);

    const auto agg_a = aggregate(once, sc);
    const auto agg_b = aggregate(pooled, sc);
    REQUIRE(agg_a == agg_b);

    CHECK(run_ensemble(sc, mode, 200, 501) == agg_a);

    CHECK_THROWS_AS(run_trajectories(sc, mode, 0, 1), config_error);
}

TEST_CASE("detector without an observer never reduces under the standard rules",
          "[ensemble]") {
    const Scenario sc = build("detector_only");

    const auto records = run_trajectories(sc, RuleMode{}, 400, 90);
    for (const auto& r : records) {
        CHECK(r.events.empty());
        CHECK_FALSE(r.t_sc.has_value());
        CHECK(r.outcome == "psi D0 + D1");
        CHECK(r.final_c == 0.0);
        CHECK_THAT(r.final_s, WithinAbs(1.0, 1e-9));
    }

    const auto es = aggregate(records, sc);
    CHECK(es.n_hit == 0);
    CHECK(es.outcomes.at("psi D0 + D1") == 400);

    // The same device does reduce objectively: both branches are marked
    // locally incoherent, so rule 1a has something to act on.
    const auto objective =
        run_ensemble(sc, RuleMode{RuleVariant::Objective, true}, 400, 90);
    CHECK(objective.n_hit > 0);
}

TEST_CASE("a full transfer window forces a hit in every trajectory", "[ensemble]") {
    ScenarioParams p;
    p.capture_window = pi / 2.0; // sin^2(g t) reaches 1
    const Scenario sc = build("observer_on_board", p);

    const auto records = run_trajectories(sc, RuleMode{}, 2000, 777);
    for (const auto& r : records) {
        REQUIRE(r.t_sc.has_value());
        REQUIRE(r.events.size() == 1);
        CHECK(r.events[0].rule == ReductionRule::Rule3);
        CHECK(r.events[0].chosen == 1);
        CHECK(r.events[0].zeroed == std::vector<int>{0});
        CHECK(r.outcome == "D1 B[0:1]*");
    }

    const auto es = aggregate(records, sc);
    CHECK(es.n_hit == 2000);
    CHECK(es.outcomes.size() == 1);

    // Degenerate weights leave no slack: the pass band collapses to
    // exact agreement.
    const auto report = born_check(
        es, {{"D1 B[0:1]*", 1.0}, {"psi D0 B[0:0]* + D1 B[0:1]~", 0.0}});
    CHECK(report.pass);
    for (const auto& e : report.entries) CHECK(e.sigma == 0.0);
}

TEST_CASE("terminal observation reproduces the pre-observation weights",
          "[ensemble]") {
    ScenarioParams p;
    p.capture_window = pi / 6.0; // capture modulus sin^2(pi/6) = 1/4
    const Scenario sc = build("terminal_observation", p);
    const long n = 20000;

    const auto records = run_trajectories(sc, RuleMode{}, n, 901);
    const double t_ob = p.capture_window + p.observe_gap;
    for (const auto& r : records) {
        REQUIRE(r.events.size() == 1);
        REQUIRE(r.t_sc.has_value());
        CHECK(*r.t_sc >= t_ob);
        CHECK(*r.t_sc <= t_ob + p.observe_window());
    }

    const auto es = aggregate(records, sc);
    const auto report = born_check(
        es, {{"D1' B[0:1]*", 0.25}, {"psi' D0 B[0:0]*", 0.75}});
    INFO("capture frequency "
         << static_cast<double>(es.outcomes.at("D1' B[0:1]*")) / n);
    CHECK(report.pass);

    // Frequencies over all outcomes close to one by construction.
    long long total = 0;
    for (const auto& [key, count] : es.outcomes) total += count;
    CHECK(total == es.n);

    // Deliberately wrong weights must fail the same gate.
    CHECK_FALSE(born_check(es, {{"D1' B[0:1]*", 0.5}, {"psi' D0 B[0:0]*", 0.5}})
                    .pass);
    CHECK_THROWS_AS(born_check(es, {{"D1' B[0:1]*", 0.25}}), config_error);
    CHECK_THROWS_AS(born_check(es, std::map<std::string, double>{}), config_error);
}

TEST_CASE("competing arousal channels split hits by coupling strength squared",
          "[ensemble]") {
    const Scenario sc = build("cat_internal_alarm");
    const long n = 20000;

    // Closed-form V-system weights: total transfer sin^2(G t) with
    // G^2 = g1^2 + g2^2, split g1^2 : g2^2 between the channels.
    const double g1 = 1.0, g2 = 0.7;
    const double G = std::sqrt(g1 * g1 + g2 * g2);
    const double s = std::sin(G * pi / 3.0);
    const double p_hit = s * s;
    const std::string awake_ext = "D1 B[0:1]*";
    const std::string awake_int = "D0 B[0:2]*";
    const std::string asleep = "D0 B[0:0]- + D1 B[0:1]~ + D0 B[0:2]~";

    const auto es = run_ensemble(sc, RuleMode{}, n, 133);
    const auto report = born_check(es, {{awake_ext, p_hit * g1 * g1 / (G * G)},
                                           {awake_int, p_hit * g2 * g2 / (G * G)},
                                           {asleep, 1.0 - p_hit}});
    std::ostringstream detail;
    for (const auto& e : report.entries)
        detail << e.outcome << ": observed " << e.observed << " expected "
               << e.expected << "\n";
    INFO(detail.str());
    CHECK(report.pass);
}

TEST_CASE("two observers close the probability and rule 4 blocks the forbidden path",
          "[ensemble]") {
    const long n = 20000;
    const std::string capture = "D1' B[0:1]* B[1:1]*";
    const std::string no_capture = "psi' D0 B[0:0]* B[1:0]*";

    const Scenario sc = build("two_observers");
    const auto records = run_trajectories(sc, RuleMode{}, n, 1200);
    for (const auto& r : records) {
        // Captures are confirmed by a second hit; the no-capture branch is
        // chosen in a single one.
        if (r.outcome == capture) {
            CHECK(r.events.size() == 2);
        } else {
            REQUIRE(r.outcome == no_capture);
            CHECK(r.events.size() == 1);
        }
    }

    const auto es = aggregate(records, sc);
    CHECK(es.n_hit == n);
    CHECK(es.outcomes.size() == 2);
    CHECK(es.forbidden_transitions == 0);
    CHECK(born_check(es, {{capture, 0.75}, {no_capture, 0.25}}).pass);

    // Same seeds with rule 4 lifted: the no-capture branch can now feed
    // the second observer's capture state, three times out of four.
    const Scenario anomalous = build("two_observers_no_rule4");
    const auto lifted = run_ensemble(anomalous, RuleMode{}, n, 1200);
    CHECK(lifted.forbidden_transitions > 0);
    const double forbidden_freq =
        static_cast<double>(lifted.forbidden_transitions) / n;
    CHECK_THAT(forbidden_freq, WithinAbs(0.1875, 3.0 * binomial_sigma(0.1875, n)));
    CHECK(born_check(lifted, {{capture, 0.9375}, {no_capture, 0.0625}}).pass);

    // Turning the flag off on the mode must match the catalog variant
    // record for record.
    const auto via_mode =
        run_trajectories(sc, RuleMode{RuleVariant::Standard, false}, 500, 1200);
    const auto via_catalog = run_trajectories(anomalous, RuleMode{}, 500, 1200);
    REQUIRE(via_mode == via_catalog);
}

TEST_CASE("standard and objective runs coincide seed by seed with an observer aboard",
          "[ensemble]") {
    const Scenario sc = build("observer_on_board");
    const long n = 500;

    const auto std_records = run_trajectories(sc, RuleMode{}, n, 333);
    const auto obj_records =
        run_trajectories(sc, RuleMode{RuleVariant::Objective, true}, n, 333);
    REQUIRE(std_records.size() == obj_records.size());
    for (std::size_t i = 0; i < std_records.size(); ++i) {
        check_same_statistics(std_records[i], obj_records[i]);
        for (std::size_t k = 0; k < std_records[i].events.size(); ++k) {
            CHECK(std_records[i].events[k].rule == ReductionRule::Rule3);
            CHECK(obj_records[i].events[k].rule == ReductionRule::Rule3mod);
        }
    }

    // Self comparison is exact agreement.
    const auto self = compare_records(std_records, std_records);
    CHECK(self.outcomes.p == 1.0);
    CHECK(self.times.d == 0.0);
    CHECK(self.times.p == 1.0);

    // Disjoint seed blocks still look alike at the 1% gate.
    const auto report = indistinguishability_test(sc, 5000, 444);
    INFO("outcome p " << report.outcomes.p << ", t_sc p " << report.times.p);
    CHECK(report.pass);

    // Halving the hazard in one arm is a difference the test must catch.
    RunOptions biased;
    biased.hazard_scale = 0.5;
    const auto fair = run_trajectories(sc, RuleMode{}, 5000, 444);
    const auto slow = run_trajectories(sc, RuleMode{}, 5000, 5444, biased);
    const auto power = compare_records(fair, slow);
    CHECK(power.outcomes.p < 0.01);
    CHECK_FALSE(power.pass);
}

TEST_CASE("hit times follow the accumulated hazard", "[ensemble]") {
    const Scenario sc = build("observer_on_board");
    const long n = 20000;
    const auto records = run_trajectories(sc, RuleMode{}, n, 555);
    const auto es = aggregate(records, sc);

    // With g = 1 over [0, pi/3) the cumulative hazard is sin^2(t), so the
    // no-trigger profile has a closed form to land on.
    const double tf = pi / 3.0;
    std::vector<double> edges;
    for (int i = 0; i <= 20; ++i) edges.push_back(tf * i / 20.0);
    const auto mass = run_hazard_profile(sc, RuleMode{}, edges);
    REQUIRE(mass.size() == 20);
    double total_mass = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double expected = std::sin(edges[i + 1]) * std::sin(edges[i + 1]) -
                                std::sin(edges[i]) * std::sin(edges[i]);
        CHECK_THAT(mass[i], WithinAbs(expected, 1e-8));
        total_mass += mass[i];
    }
    CHECK_THAT(total_mass, WithinAbs(0.75, 1e-8));

    // The ensemble histogram over the same bins against the profile.
    REQUIRE(es.t_sc_hist.counts.size() == 20);
    CHECK(es.t_sc_hist.lo == 0.0);
    CHECK_THAT(es.t_sc_hist.hi, WithinAbs(tf, 1e-15));
    std::vector<double> observed;
    for (auto c : es.t_sc_hist.counts) observed.push_back(static_cast<double>(c));
    const auto gof = stats::chi_square_gof(observed, mass);
    INFO("hit-time GOF p = " << gof.p);
    CHECK(gof.p > 0.01);

    // Totality: the no-hit trajectories carry the full accumulated hazard,
    // identically, and the hit fraction is the matching binomial draw.
    double first_c = -1.0;
    for (const auto& r : records) {
        if (r.t_sc) continue;
        if (first_c < 0.0) first_c = r.final_c;
        REQUIRE(r.final_c == first_c);
    }
    CHECK_THAT(first_c, WithinAbs(0.75, 1e-8));
    const double hit_frac = static_cast<double>(es.n_hit) / n;
    CHECK_THAT(hit_frac, WithinAbs(es.mean_final_c,
                                   3.0 * binomial_sigma(es.mean_final_c, n)));

    CHECK_THROWS_AS(run_hazard_profile(sc, RuleMode{}, {0.5}), config_error);
    CHECK_THROWS_AS(run_hazard_profile(sc, RuleMode{}, {0.5, 0.2}), config_error);
}

TEST_CASE("every built-in runs quietly under the everett audit", "[ensemble]") {
    RunOptions opts;
    opts.audit_everett = true;
    for (const auto& name : catalog_names()) {
        const Scenario sc = build(name);
        for (RuleVariant variant : {RuleVariant::Standard, RuleVariant::Objective}) {
            INFO(name << " under " << to_string(variant) << " rules");
            const auto records =
                run_trajectories(sc, RuleMode{variant, true}, 30, 4242, opts);
            CHECK(records.size() == 30);
        }
    }
}

TEST_CASE("trajectory failures report the offending seed", "[ensemble]") {
    // Two awake states of one observer with weight at the same time is
    // exactly what the audit exists to catch.
    Scenario sc;
    sc.name = "double_conscious";
    const double inv = 1.0 / std::sqrt(2.0);
    sc.initial = {
        Component{cplx{inv, 0.0},
                  {FactorLabel::brain(0, 0, BrainStatus::Conscious)}, false, false, 0.0},
        Component{cplx{inv, 0.0},
                  {FactorLabel::brain(0, 1, BrainStatus::Conscious)}, false, false, 0.0}};
    sc.duration = 1.0;

    RunOptions opts;
    opts.audit_everett = true;
    CHECK_THROWS_MATCHES(run_trajectories(sc, RuleMode{}, 10, 42, opts), rule_error,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("seed 42") &&
                             ContainsSubstring("everett exclusion")));
    opts.threads = 2;
    CHECK_THROWS_MATCHES(run_trajectories(sc, RuleMode{}, 10, 42, opts), rule_error,
                         Catch::Matchers::MessageMatches(ContainsSubstring("seed 42")));
}

TEST_CASE("traces record the evolution the exports replay", "[ensemble]") {
    const Scenario sc = build("observer_on_board");
    RunOptions opts;
    opts.collect_trace = true;
    const auto rec = run_trajectory(sc, RuleMode{}, 61, opts);

    REQUIRE(rec.trace.size() > 10);
    CHECK(rec.trace.front().t == 0.0);
    CHECK_THAT(rec.trace.front().s, WithinAbs(1.0, 1e-12));
    CHECK_THAT(rec.trace.front().moduli[0], WithinAbs(1.0, 1e-12));
    CHECK(rec.trace.back().t == sc.duration);
    CHECK_THAT(rec.trace.back().s, WithinAbs(rec.final_s, 1e-12));
    for (std::size_t i = 1; i < rec.trace.size(); ++i)
        CHECK(rec.trace[i].t > rec.trace[i - 1].t);

    const std::string trace_path = "ensemble_trace.csv";
    write_trace_csv(rec, sc.final_component_count(), trace_path);
    std::ifstream in(trace_path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,s,m0,m1,J0,J1");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == rec.trace.size());
    std::remove(trace_path.c_str());
}

TEST_CASE("stat exports round numbers through text exactly", "[ensemble]") {
    const Scenario sc = build("observer_on_board");
    const auto es = run_ensemble(sc, RuleMode{}, 1000, 2024);

    const std::string out_csv = "ensemble_outcomes.csv";
    write_outcomes_csv(es, out_csv);
    {
        std::ifstream in(out_csv);
        REQUIRE(in.good());
        std::string header;
        std::getline(in, header);
        CHECK(header == "outcome,count,frequency");
        long long total = 0;
        for (std::string line; std::getline(in, line);) {
            const auto last_comma = line.rfind(',');
            const auto mid_comma = line.rfind(',', last_comma - 1);
            total += std::stoll(line.substr(mid_comma + 1, last_comma - mid_comma - 1));
        }
        CHECK(total == es.n);
    }
    std::remove(out_csv.c_str());

    const std::string hist_csv = "ensemble_hist.csv";
    write_histogram_csv(es.t_sc_hist, hist_csv);
    {
        std::ifstream in(hist_csv);
        REQUIRE(in.good());
        std::string header;
        std::getline(in, header);
        CHECK(header == "bin_lo,bin_hi,count");
        std::size_t rows = 0;
        for (std::string line; std::getline(in, line);) ++rows;
        CHECK(rows == es.t_sc_hist.counts.size());
    }
    std::remove(hist_csv.c_str());

    const std::string summary = "ensemble_summary.json";
    write_summary_json(sc, RuleMode{}, 1000, 2024, es, summary);
    {
        std::ifstream in(summary);
        REQUIRE(in.good());
        const auto doc = nlohmann::json::parse(in);
        CHECK(doc.at("scenario") == "observer_on_board");
        CHECK(doc.at("mode") == "standard");
        CHECK(doc.at("rule4_enabled") == true);
        CHECK(doc.at("n") == 1000);
        CHECK(doc.at("base_seed") == 2024);
        CHECK(doc.at("n_hit").get<long long>() == es.n_hit);
        CHECK(doc.at("mean_t_sc").get<double>() == es.mean_t_sc);
        CHECK(doc.at("forbidden_transitions") == 0);
        long long total = 0;
        for (const auto& [key, count] : doc.at("outcomes").items())
            total += count.get<long long>();
        CHECK(total == es.n);
    }
    std::remove(summary.c_str());
}
