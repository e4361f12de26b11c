#pragma once

// The sign-off checklist: every headline claim the library makes, run at
// desk scale with pinned seeds and tolerances. Each criterion reports one
// pass/fail line with the measured numbers it was judged on.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "readyrules/ensemble.hpp"
#include "readyrules/pulse.hpp"
#include "readyrules/rules.hpp"
#include "readyrules/scenarios.hpp"
#include "readyrules/statedyn.hpp"
#include "readyrules/stats.hpp"

namespace readyrules {

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace acceptance {

constexpr double p_gate = 0.01;

inline double three_sigma(double w, long n) {
    return 3.0 * std::sqrt(w * (1.0 - w) / static_cast<double>(n));
}

inline std::string num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// Capture frequency against the Born weight of the pre-observation state,
// with the whole run held to a wall-clock budget.
inline CriterionResult born_recovery() {
    const long n = 100000;
    ScenarioParams p;
    p.capture_window = std::numbers::pi / 6.0; // capture modulus 1/4
    const Scenario sc = build("terminal_observation", p);

    const auto started = std::chrono::steady_clock::now();
    const EnsembleStats es = run_ensemble(sc, RuleMode{}, n, 101);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();

    const auto it = es.outcomes.find("D1' B[0:1]*");
    const double freq =
        it == es.outcomes.end()
            ? 0.0
            : static_cast<double>(it->second) / static_cast<double>(n);
    const double band = three_sigma(0.25, n);

    CriterionResult r;
    r.name = "born recovery";
    r.pass = std::abs(freq - 0.25) <= band && seconds < 60.0;
    r.detail = "capture frequency " + num(freq) + " vs 0.25 +/- " + num(band) +
               ", runtime " + num(seconds) + " s";
    return r;
}

// A transfer window long enough to move all square modulus must make the
// hit certain.
inline CriterionResult unit_hit_probability() {
    const long n = 10000;
    ScenarioParams p;
    p.capture_window = std::numbers::pi / 2.0;
    const Scenario sc = build("observer_on_board", p);
    const EnsembleStats es = run_ensemble(sc, RuleMode{}, n, 202);

    CriterionResult r;
    r.name = "unit hit probability";
    r.pass = es.n_hit == n;
    r.detail = std::to_string(es.n_hit) + " of " + std::to_string(n) +
               " trajectories hit";
    return r;
}

// The two second-look outcomes exhaust the probability, and the path into
// the second observer's capture state through a rule-4 pair appears only
// when the rule is switched off, on the same seeds.
inline CriterionResult two_observer_completeness() {
    const long n = 100000;
    const std::uint64_t seed = 303;
    const std::string capture = "D1' B[0:1]* B[1:1]*";
    const std::string no_capture = "psi' D0 B[0:0]* B[1:0]*";

    const EnsembleStats with_rule4 =
        run_ensemble(build("two_observers"), RuleMode{}, n, seed);
    const EnsembleStats without_rule4 =
        run_ensemble(build("two_observers_no_rule4"), RuleMode{}, n, seed);

    auto freq = [&](const EnsembleStats& es, const std::string& key) {
        const auto it = es.outcomes.find(key);
        return it == es.outcomes.end()
                   ? 0.0
                   : static_cast<double>(it->second) / static_cast<double>(n);
    };
    const double sum = freq(with_rule4, capture) + freq(with_rule4, no_capture);
    const bool sum_closes = std::abs(sum - 1.0) <= three_sigma(0.75, n);
    const bool weights_ok =
        born_check(with_rule4, {{capture, 0.75}, {no_capture, 0.25}}).pass;

    CriterionResult r;
    r.name = "two-observer completeness";
    r.pass = sum_closes && weights_ok && with_rule4.forbidden_transitions == 0 &&
             without_rule4.forbidden_transitions > 0;
    r.detail = "outcome sum " + num(sum) + ", forbidden transitions " +
               std::to_string(with_rule4.forbidden_transitions) + " with rule 4, " +
               std::to_string(without_rule4.forbidden_transitions) + " without";
    return r;
}

// Standard and objective running must be statistically inseparable, while
// a deliberately biased arm must be caught by the same tests.
inline CriterionResult mode_indistinguishability(
    const std::vector<TrajectoryRecord>& standard_arm, const Scenario& sc, long n,
    std::uint64_t seed) {
    const auto objective_arm =
        run_trajectories(sc, RuleMode{RuleVariant::Objective, true}, n,
                         seed + static_cast<std::uint64_t>(n));
    const ComparisonReport fair = compare_records(standard_arm, objective_arm);

    RunOptions biased;
    biased.hazard_scale = 0.5;
    const auto slow_arm = run_trajectories(
        sc, RuleMode{}, n, seed + 2 * static_cast<std::uint64_t>(n), biased);
    const ComparisonReport control = compare_records(standard_arm, slow_arm);

    CriterionResult r;
    r.name = "mode indistinguishability";
    r.pass = fair.pass && control.outcomes.p < p_gate;
    r.detail = "outcome p " + num(fair.outcomes.p) + ", hit-time p " +
               num(fair.times.p) + ", biased control p " + num(control.outcomes.p);
    return r;
}

// Two-component Rabi dynamics against the closed form, the per-step norm
// drift, and the currents against a centered difference of the moduli.
inline CriterionResult dynamics_oracle() {
    double worst_m = 0.0, worst_drift = 0.0, worst_j = 0.0;

    for (double g : {0.1, 1.0, 10.0}) {
        SystemState st;
        st.components = {
            Component{cplx{1.0, 0.0},
                      {FactorLabel::particle(), FactorLabel::detector(0)}, false,
                      false, 0.0},
            Component{cplx{0.0, 0.0}, {FactorLabel::detector(1)}, false, false, 0.0}};
        st.refresh_s();
        HamiltonianSchedule sched;
        const double horizon = 10.0 / g;
        sched.add(0, 1, cplx{g, 0.0}, 0.0, horizon + 1.0);
        const std::vector<cplx> H = effective_matrix(st, sched);

        const long nsteps = static_cast<long>(
            std::ceil(horizon / (2.0 * std::numbers::pi / (200.0 * g))));
        const double dt = horizon / static_cast<double>(nsteps);
        const double h = 1e-4 / g;

        StepWorkspace ws;
        std::vector<double> J;
        double s_prev = st.s;
        for (long k = 0; k <= nsteps; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double m2 = st.components[1].modulus();
            worst_m = std::max(worst_m,
                               std::abs(m2 - std::sin(g * t) * std::sin(g * t)));

            net_currents_into(st, H, J);
            SystemState fwd = st, bwd = st;
            rk4_step(fwd, H, h, nullptr, 1.0, ws);
            rk4_step(bwd, H, -h, nullptr, 1.0, ws);
            for (int i = 0; i < 2; ++i) {
                const double fd = (fwd.components[i].modulus() -
                                   bwd.components[i].modulus()) /
                                  (2.0 * h);
                worst_j = std::max(worst_j, std::abs(J[i] - fd));
            }

            if (k == nsteps) break;
            rk4_step(st, H, dt, nullptr, 1.0, ws);
            st.refresh_s();
            worst_drift = std::max(worst_drift, std::abs(st.s - s_prev));
            s_prev = st.s;
        }
    }

    CriterionResult r;
    r.name = "dynamics oracle";
    r.pass = worst_m < 1e-6 && worst_drift < 1e-9 && worst_j < 1e-6;
    r.detail = "max |m2 - sin^2| " + num(worst_m) + ", max step drift " +
               num(worst_drift) + ", max |J - fd| " + num(worst_j);
    return r;
}

// The empirical first-hit histogram against the accumulated hazard of a
// deterministic run over the same bins.
inline CriterionResult hit_time_density(const std::vector<TrajectoryRecord>& records,
                                        const Scenario& sc) {
    const EnsembleStats es = aggregate(records, sc);
    std::vector<double> edges;
    const int bins = static_cast<int>(es.t_sc_hist.counts.size());
    for (int i = 0; i < bins; ++i) edges.push_back(es.t_sc_hist.bin_lo(i));
    edges.push_back(es.t_sc_hist.hi);
    const auto mass = run_hazard_profile(sc, RuleMode{}, edges);

    std::vector<double> observed;
    for (auto c : es.t_sc_hist.counts) observed.push_back(static_cast<double>(c));
    const stats::TestResult gof = stats::chi_square_gof(observed, mass);

    CriterionResult r;
    r.name = "hit-time density";
    r.pass = gof.p > p_gate;
    r.detail = "chi-square p " + num(gof.p) + " over " + std::to_string(bins) +
               " bins, " + std::to_string(es.n_hit) + " hits";
    return r;
}

// Full-ensemble audit of the one-conscious-state-per-observer invariant,
// every built-in under both rule variants.
inline CriterionResult everett_exclusion() {
    const long n = 1000;
    RunOptions opts;
    opts.audit_everett = true;

    long long audited = 0;
    CriterionResult r;
    r.name = "everett exclusion";
    try {
        for (const auto& name : catalog_names())
            for (RuleVariant variant : {RuleVariant::Standard, RuleVariant::Objective}) {
                run_trajectories(build(name), RuleMode{variant, true}, n, 7007, opts);
                audited += n;
            }
        r.pass = true;
        r.detail = "0 violations across " + std::to_string(audited) +
                   " audited trajectories";
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("audit tripped: ") + e.what();
    }
    return r;
}

// Weight conservation and monotone climb of the drifting pulse, plus the
// PET ratio separation appearing exactly when drift is active.
inline CriterionResult pain_drift_and_pet() {
    const ConsciousPulse start = dissolve(1.0, ResolutionKernel{0.15}, 0.3, 12);

    ConsciousPulse p = start;
    for (long k = 0; k < 1000000; ++k) p = drift_step(p, 0.05);
    const double leak = std::abs(p.total() - start.total());
    const bool conserved = leak <= 1e-12;

    // Strict climb while the weight below the top bin is still resolvable
    // in the recomputed mean; once it drops under that, the mean can only
    // wobble by rounding noise until the pulse settles into an exact fixed
    // point.
    ConsciousPulse q = start;
    double prev = q.mean_r();
    bool monotone = true;
    bool settled = false;
    for (long k = 0; k < 200000; ++k) {
        const ConsciousPulse next = drift_step(q, 0.05);
        if (next.weights == q.weights) {
            settled = true;
            break;
        }
        double off_top = 0.0;
        for (int i = 0; i + 1 < q.bins(); ++i) off_top += q.weights[i];
        const double m = next.mean_r();
        if (off_top > 1e-10 ? !(m > prev) : m + 1e-14 < prev) monotone = false;
        prev = m;
        q = next;
    }
    double leftover = 0.0;
    for (int i = 0; i + 1 < q.bins(); ++i) leftover += q.weights[i];
    const bool topped = leftover <= 1e-12 * q.total();

    bool pet_ok = true;
    for (double ag : {0.05, 0.2})
        for (double ant : {0.1, 0.4})
            for (double beta : {0.25, 1.0}) {
                PetModel model;
                model.beta = beta;
                auto quad = [&](double eta) {
                    return std::array<PetScan, 4>{
                        PetScan{ag, ant, PetSpecies::Agonist, true, eta},
                        PetScan{ag, ant, PetSpecies::Antagonist, true, eta},
                        PetScan{ag / 128, ant / 128, PetSpecies::Agonist, false, 0.0},
                        PetScan{ag / 128, ant / 128, PetSpecies::Antagonist, false,
                                0.0}};
                };
                const auto off = quad(0.0);
                const auto on = quad(0.1);
                const PetRatios r_off = model.ratios(off[0], off[1], off[2], off[3]);
                const PetRatios r_on = model.ratios(on[0], on[1], on[2], on[3]);
                pet_ok = pet_ok && r_off.r_ab == r_off.r_cd && r_on.r_ab > r_on.r_cd;
            }

    CriterionResult r;
    r.name = "rule 5 drift and pet ratios";
    r.pass = conserved && monotone && settled && topped && pet_ok;
    r.detail = "weight leak " + num(leak) + " over 1e6 steps, climb " +
               (monotone && settled && topped ? "monotone to the top bin"
                                              : "BROKEN") +
               ", pet grid " + (pet_ok ? "separates with drift only" : "FAILED");
    return r;
}

// The kernel keeps close states from reducing fully and wipes out far ones.
inline CriterionResult resolution_limit() {
    bool pass = true;
    double near_ratio = 0.0, far_ratio = 0.0;
    for (double width : {0.05, 0.1, 0.3})
        for (int chosen : {1, 2}) {
            const ResolutionKernel kernel{width};
            const std::pair<double, double> original{0.6, 0.4};
            const double other = chosen == 1 ? original.second : original.first;

            const auto near = partial_reduction(original, width, kernel, chosen);
            const auto far = partial_reduction(original, 10.0 * width, kernel, chosen);
            const double near_left = chosen == 1 ? near.second : near.first;
            const double far_left = chosen == 1 ? far.second : far.first;

            near_ratio = near_left / other;
            far_ratio = far_left / other;
            pass = pass && near_left > 0.5 * other && far_left < 1e-10 * other;
        }

    CriterionResult r;
    r.name = "resolution limit";
    r.pass = pass;
    r.detail = "surviving fraction " + num(near_ratio) +
               " at one width, " + num(far_ratio) + " at ten widths";
    return r;
}

} // namespace acceptance

inline std::vector<CriterionResult> run_acceptance() {
    std::vector<CriterionResult> results;
    results.push_back(acceptance::born_recovery());
    results.push_back(acceptance::unit_hit_probability());
    results.push_back(acceptance::two_observer_completeness());

    // Criteria 4 and 6 share the standard observer_on_board ensemble.
    const long n = 100000;
    const std::uint64_t seed = 404;
    const Scenario on_board = build("observer_on_board");
    const auto standard_arm = run_trajectories(on_board, RuleMode{}, n, seed);
    results.push_back(
        acceptance::mode_indistinguishability(standard_arm, on_board, n, seed));
    results.push_back(acceptance::dynamics_oracle());
    results.push_back(acceptance::hit_time_density(standard_arm, on_board));
    results.push_back(acceptance::everett_exclusion());
    results.push_back(acceptance::pain_drift_and_pet());
    results.push_back(acceptance::resolution_limit());
    return results;
}

// Prints one line per criterion plus a closing summary and returns the
// number of failures.
inline int report_acceptance(std::ostream& os) {
    const auto results = run_acceptance();
    int failures = 0;
    for (const auto& r : results) {
        os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
        if (!r.pass) ++failures;
    }
    if (failures == 0)
        os << "acceptance: all " << results.size() << " criteria pass\n";
    else
        os << "acceptance: " << failures << " of " << results.size()
           << " criteria failed\n";
    return failures;
}

} // namespace readyrules
