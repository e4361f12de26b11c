#pragma once

// Trajectory ensembles. A single trajectory integrates a scenario with the
// reduction trigger armed and applies rules 2/3/1a/4 as they come due; an
// ensemble runs N of them on consecutive seeds and aggregates outcome and
// hit-time statistics, which the hypothesis tests consume.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "readyrules/errors.hpp"
#include "readyrules/pulse.hpp"
#include "readyrules/rules.hpp"
#include "readyrules/scenarios.hpp"
#include "readyrules/statedyn.hpp"
#include "readyrules/stats.hpp"

namespace readyrules {

struct RunOptions {
    double dt_override = 0.0;   // 0 sizes steps off the strongest active coupling
    bool audit_everett = false; // check the exclusion principle after every step
    double hazard_scale = 1.0;  // test hook: biases the trigger accumulation
    int threads = 1;
    bool collect_trace = false;
};

struct TracePoint {
    double t = 0.0;
    double s = 0.0;
    std::vector<double> moduli;
    std::vector<double> currents;

    bool operator==(const TracePoint&) const = default;
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::vector<ReductionEvent> events;
    std::string outcome;
    double final_s = 0.0;
    std::optional<double> t_sc; // first hit time
    double final_c = 0.0;       // trigger accumulation left over at the end
    std::vector<TracePoint> trace;

    bool operator==(const TrajectoryRecord&) const = default;
};

// Cumulative hazard split over time bins, filled by a deterministic
// no-trigger run. mass[i] is the expected fraction of first hits landing
// in [edges[i], edges[i+1]).
struct HazardProfile {
    std::vector<double> edges;
    std::vector<double> mass;
};

namespace detail {

// Times where the active coupling set or the component list changes. The
// integrator never steps across one of these.
inline std::vector<double> run_boundaries(const Scenario& sc,
                                          const std::vector<double>& extra) {
    std::vector<double> b{sc.duration};
    auto push = [&](double t) {
        if (t > 0.0 && t < sc.duration) b.push_back(t);
    };
    for (double t : sc.schedule.window_edges()) push(t);
    for (const auto& ev : sc.events) {
        push(ev.t);
        if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action))
            for (const auto& e : spawn->couplings) {
                push(e.t_start);
                push(e.t_end);
            }
    }
    for (double t : extra) push(t);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

inline int profile_bin(const HazardProfile& prof, double t) {
    if (t < prof.edges.front() || t >= prof.edges.back()) return -1;
    auto it = std::upper_bound(prof.edges.begin(), prof.edges.end(), t);
    return static_cast<int>(it - prof.edges.begin()) - 1;
}

// One trajectory from t = 0 to the scenario duration. With a profile
// attached the trigger never fires and the per-step hazard integrals are
// binned instead, which turns the run into the deterministic expectation.
inline TrajectoryRecord run_one(const Scenario& sc, const RuleMode& mode,
                                std::uint64_t seed, const RunOptions& opts,
                                HazardProfile* profile) {
    SystemState st;
    st.components = sc.initial;
    st.time = 0.0;
    st.refresh_s();

    HamiltonianSchedule sched = sc.schedule;
    const bool rule4_on = mode.rule4_enabled && sc.rule4_enabled;
    apply_rule4_mask(st, sched, rule4_on);

    std::mt19937_64 rng(seed);
    Trigger trigger;
    const bool fire = profile == nullptr;
    if (fire) trigger.arm(rng);

    TrajectoryRecord rec;
    rec.seed = seed;

    const std::vector<double> boundaries =
        run_boundaries(sc, profile ? profile->edges : std::vector<double>{});

    StepWorkspace ws;
    std::vector<cplx> H;
    std::vector<double> J;
    std::vector<cplx> saved;
    std::size_t ev_idx = 0;

    auto audit = [&]() {
        if (opts.audit_everett && !everett_ok(st))
            throw rule_error("everett exclusion violated at t = " +
                             std::to_string(st.time));
    };
    auto trace_point = [&]() {
        if (!opts.collect_trace) return;
        TracePoint p;
        p.t = st.time;
        p.s = st.s;
        net_currents_into(st, H, p.currents);
        for (const auto& c : st.components) p.moduli.push_back(c.modulus());
        rec.trace.push_back(std::move(p));
    };
    audit();

    for (double b : boundaries) {
        while (st.time < b) {
            const double t0 = st.time;
            const double g_max = sched.max_strength_in(t0, b);
            if (!(g_max > 0.0)) {
                // Nothing couples here: amplitudes are frozen and the
                // hazard is zero, so the whole stretch can be skipped.
                const int n = st.size();
                H.assign(static_cast<std::size_t>(n) * n, cplx{0.0, 0.0});
                trace_point();
                st.time = b;
                break;
            }
            const double dt_target = opts.dt_override > 0.0
                                         ? opts.dt_override
                                         : 2.0 * std::numbers::pi / (200.0 * g_max);
            const long nsteps =
                std::max<long>(1, static_cast<long>(std::ceil((b - t0) / dt_target)));
            const double dt = (b - t0) / static_cast<double>(nsteps);

            st.refresh_s();
            assemble_matrix(st, sched, t0, H);

            std::vector<int> eligible;
            if (sc.subsystem.empty()) {
                eligible = eligible_components(st, mode);
            } else {
                std::vector<int> sub;
                for (int i : sc.subsystem)
                    if (i < st.size()) sub.push_back(i);
                eligible = eligible_components(st, mode, &sub);
            }
            const std::vector<int>* elig = eligible.empty() ? nullptr : &eligible;

            bool hit_here = false;
            for (long i = 0; i < nsteps; ++i) {
                st.time = t0 + static_cast<double>(i) * dt;
                trace_point();

                saved.resize(st.components.size());
                for (std::size_t k = 0; k < saved.size(); ++k)
                    saved[k] = st.components[k].amplitude;

                const double dc =
                    rk4_step(st, H, dt, elig, st.s, ws) * opts.hazard_scale;

                if (profile) {
                    rec.final_c += dc;
                    const int bin = profile_bin(*profile, st.time + 0.5 * dt);
                    if (bin >= 0) profile->mass[bin] += dc;
                    st.time = t0 + static_cast<double>(i + 1) * dt;
                    continue;
                }

                if (dc >= 0.1)
                    throw config_error(
                        "time step too coarse: hazard * dt must stay below 0.1");
                const auto fraction = trigger.advance(dc);
                if (!fraction) {
                    st.time = t0 + static_cast<double>(i + 1) * dt;
                    audit();
                    continue;
                }

                // Rewind the step and land on the crossing point.
                for (std::size_t k = 0; k < saved.size(); ++k)
                    st.components[k].amplitude = saved[k];
                st.time = t0 + static_cast<double>(i) * dt;
                rk4_step(st, H, *fraction * dt, nullptr, st.s, ws);
                st.time += *fraction * dt;

                net_currents_into(st, H, J);
                const int chosen = select_component(J, eligible, rng);

                // A hit fed through a pair rule 4 would mask marks the
                // trajectory as carrying the impossible outcome. Statuses
                // must be inspected before the rule rewrites them.
                bool via_masked = false;
                const auto pairs = rule4_pairs(st);
                if (!pairs.empty()) {
                    const int n = st.size();
                    const cplx cc = std::conj(st.components[chosen].amplitude);
                    for (int m = 0; m < n && !via_masked; ++m) {
                        if (m == chosen) continue;
                        if (!pairs.count(HamiltonianSchedule::pair_key(m, chosen)))
                            continue;
                        const cplx h = H[static_cast<std::size_t>(chosen) * n + m];
                        if (h == cplx{0.0, 0.0}) continue;
                        if (2.0 * std::imag(cc * h * st.components[m].amplitude) > 0.0)
                            via_masked = true;
                    }
                }

                ReductionEvent ev = mode.variant == RuleVariant::Standard
                                        ? apply_rule3(st, chosen)
                                        : apply_rule1a(st, chosen);
                ev.via_masked_pair = via_masked;
                if (!rec.t_sc) rec.t_sc = ev.time;
                rec.events.push_back(ev);
                audit();
                apply_rule4_mask(st, sched, rule4_on);
                trigger.arm(rng);
                hit_here = true;
                break;
            }
            if (!hit_here && st.time < b) st.time = b;
            check_finite(st);
            st.refresh_s();
        }

        while (ev_idx < sc.events.size() && sc.events[ev_idx].t <= b) {
            const auto& ev = sc.events[ev_idx];
            if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action)) {
                apply_rule2(st, spawn->components, spawn->discontinuous);
                for (const auto& e : spawn->couplings)
                    sched.add(e.row, e.col, e.g, e.t_start, e.t_end);
                apply_rule4_mask(st, sched, rule4_on);
            } else if (const auto* endw = std::get_if<EndWindowSpec>(&ev.action)) {
                sched.end_window(endw->row, endw->col, ev.t);
            } else if (const auto* inc = std::get_if<SetIncoherentSpec>(&ev.action)) {
                for (int i : inc->indices) {
                    if (i < 0 || i >= st.size())
                        throw config_error("set_incoherent index " + std::to_string(i) +
                                           " out of range");
                    st.components[i].incoherent = true;
                }
            }
            ++ev_idx;
            st.refresh_s();
            audit();
        }
    }

    if (opts.collect_trace) {
        assemble_matrix(st, sched, st.time, H);
        trace_point();
    }

    rec.outcome = st.outcome_key();
    rec.final_s = st.s;
    if (fire) rec.final_c = trigger.c;
    return rec;
}

} // namespace detail

inline TrajectoryRecord run_trajectory(const Scenario& sc, const RuleMode& mode,
                                       std::uint64_t seed, const RunOptions& opts = {}) {
    sc.validate();
    return detail::run_one(sc, mode, seed, opts, nullptr);
}

// N independent trajectories on seeds base_seed .. base_seed + N - 1. The
// work is pulled from a shared counter by a small pool; records land in a
// preallocated slot per seed, so the thread count never changes results.
inline std::vector<TrajectoryRecord> run_trajectories(const Scenario& sc,
                                                      const RuleMode& mode, long n,
                                                      std::uint64_t base_seed,
                                                      const RunOptions& opts = {}) {
    if (n < 1) throw config_error("ensemble size must be at least 1");
    sc.validate();

    std::vector<TrajectoryRecord> records(static_cast<std::size_t>(n));
    std::atomic<long> next{0};
    std::mutex err_mutex;
    long err_index = -1;
    std::exception_ptr err;

    auto fail = [&](long i, std::exception_ptr e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (err_index < 0 || i < err_index) {
            err_index = i;
            err = std::move(e);
        }
    };
    auto wrap = [&]<class E>(long i, const E& e) {
        fail(i, std::make_exception_ptr(E("seed " +
                                          std::to_string(base_seed +
                                                         static_cast<std::uint64_t>(i)) +
                                          ": " + e.what())));
    };
    auto worker = [&]() {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                records[static_cast<std::size_t>(i)] = detail::run_one(
                    sc, mode, base_seed + static_cast<std::uint64_t>(i), opts, nullptr);
            } catch (const rule_error& e) {
                wrap(i, e);
            } catch (const model_error& e) {
                wrap(i, e);
            } catch (const config_error& e) {
                wrap(i, e);
            } catch (const numerical_error& e) {
                wrap(i, e);
            } catch (const validation_error& e) {
                wrap(i, e);
            } catch (...) {
                fail(i, std::current_exception());
            }
        }
    };

    const long pool = std::clamp<long>(opts.threads, 1, n);
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(pool));
        for (long i = 0; i < pool; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (err) std::rethrow_exception(err);
    return records;
}

struct EnsembleStats {
    long long n = 0;
    std::map<std::string, long long> outcomes;
    stats::Histogram t_sc_hist;
    long long n_hit = 0;
    double mean_t_sc = 0.0;
    double var_t_sc = 0.0;
    // Trajectories with at least one hit through a rule-4 pair.
    long long forbidden_transitions = 0;
    // Leftover trigger accumulation averaged over the no-hit trajectories;
    // deterministic, so it doubles as the total cumulative hazard.
    double mean_final_c = 0.0;
    double mean_final_s = 0.0;

    bool operator==(const EnsembleStats&) const = default;
};

// Histogram support for hit times: the span of all coupling windows,
// clamped to the run. Falls back to the full duration.
inline std::pair<double, double> active_window(const Scenario& sc) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto fold = [&](const CouplingEntry& e) {
        lo = std::min(lo, e.t_start);
        hi = std::max(hi, e.t_end);
    };
    for (const auto& e : sc.schedule.entries) fold(e);
    for (const auto& ev : sc.events)
        if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action))
            for (const auto& e : spawn->couplings) fold(e);
    lo = std::max(lo, 0.0);
    hi = std::min(hi, sc.duration);
    if (!(hi > lo)) return {0.0, sc.duration};
    return {lo, hi};
}

inline EnsembleStats aggregate(const std::vector<TrajectoryRecord>& records,
                               const Scenario& sc, int bins = 20) {
    if (records.empty()) throw config_error("cannot aggregate an empty ensemble");
    EnsembleStats es;
    es.n = static_cast<long long>(records.size());

    std::vector<double> times;
    long long n_miss = 0;
    double sum_c = 0.0;
    double sum_s = 0.0;
    for (const auto& r : records) {
        ++es.outcomes[r.outcome];
        if (r.t_sc) {
            times.push_back(*r.t_sc);
        } else {
            ++n_miss;
            sum_c += r.final_c;
        }
        sum_s += r.final_s;
        for (const auto& e : r.events)
            if (e.via_masked_pair) {
                ++es.forbidden_transitions;
                break;
            }
    }

    es.n_hit = static_cast<long long>(times.size());
    const auto [lo, hi] = active_window(sc);
    es.t_sc_hist = stats::make_histogram(times, lo, hi, bins);
    if (es.n_hit > 0) {
        double sum = 0.0;
        for (double t : times) sum += t;
        es.mean_t_sc = sum / static_cast<double>(es.n_hit);
        double m2 = 0.0;
        for (double t : times) m2 += (t - es.mean_t_sc) * (t - es.mean_t_sc);
        es.var_t_sc = es.n_hit > 1 ? m2 / static_cast<double>(es.n_hit - 1) : 0.0;
    }
    es.mean_final_c = n_miss > 0 ? sum_c / static_cast<double>(n_miss) : 0.0;
    es.mean_final_s = sum_s / static_cast<double>(es.n);
    return es;
}

inline EnsembleStats run_ensemble(const Scenario& sc, const RuleMode& mode, long n,
                                  std::uint64_t base_seed, const RunOptions& opts = {}) {
    return aggregate(run_trajectories(sc, mode, n, base_seed, opts), sc);
}

// Expected first-hit mass per bin from a single deterministic run with the
// trigger disarmed. The accumulated hazard equals the first-hit CDF, so
// the per-bin increments are exactly what an ensemble histogram estimates.
inline std::vector<double> run_hazard_profile(const Scenario& sc, const RuleMode& mode,
                                              const std::vector<double>& edges,
                                              const RunOptions& opts = {}) {
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
        throw config_error("hazard profile needs at least two ascending bin edges");
    sc.validate();
    HazardProfile prof;
    prof.edges = edges;
    prof.mass.assign(edges.size() - 1, 0.0);
    detail::run_one(sc, mode, 0, opts, &prof);
    return prof.mass;
}

struct BornEntry {
    std::string outcome;
    double expected = 0.0;
    double observed = 0.0;
    double sigma = 0.0;
    bool pass = false;
};

struct BornReport {
    std::vector<BornEntry> entries;
    bool pass = true;
};

// Outcome frequencies against expected weights at three binomial standard
// errors. A weight of exactly 0 or 1 collapses the band to equality.
inline BornReport born_check(const EnsembleStats& es,
                             const std::map<std::string, double>& expected) {
    if (expected.empty()) throw config_error("born_check needs expected weights");
    double total = 0.0;
    for (const auto& [key, w] : expected) {
        if (w < 0.0 || w > 1.0)
            throw config_error("expected weight for '" + key + "' must lie in [0, 1]");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw config_error("expected weights must sum to 1");

    std::map<std::string, double> weights = expected;
    for (const auto& kv : es.outcomes) weights.emplace(kv.first, 0.0);

    BornReport report;
    for (const auto& [key, w] : weights) {
        BornEntry entry;
        entry.outcome = key;
        entry.expected = w;
        const auto it = es.outcomes.find(key);
        const long long count = it == es.outcomes.end() ? 0 : it->second;
        entry.observed = static_cast<double>(count) / static_cast<double>(es.n);
        entry.sigma = std::sqrt(w * (1.0 - w) / static_cast<double>(es.n));
        entry.pass = std::abs(entry.observed - w) <= 3.0 * entry.sigma;
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

struct ComparisonReport {
    stats::TestResult outcomes;
    stats::KsResult times;
    bool pass = false;
};

// Chi-square homogeneity over the union of outcome keys plus a two-sample
// KS test on the hit times.
inline ComparisonReport compare_records(const std::vector<TrajectoryRecord>& a,
                                        const std::vector<TrajectoryRecord>& b) {
    std::map<std::string, std::pair<double, double>> table;
    for (const auto& r : a) table[r.outcome].first += 1.0;
    for (const auto& r : b) table[r.outcome].second += 1.0;
    std::vector<double> ca, cb;
    for (const auto& [key, counts] : table) {
        ca.push_back(counts.first);
        cb.push_back(counts.second);
    }

    ComparisonReport rep;
    rep.outcomes = stats::chi_square_homogeneity(ca, cb);

    std::vector<double> ta, tb;
    for (const auto& r : a)
        if (r.t_sc) ta.push_back(*r.t_sc);
    for (const auto& r : b)
        if (r.t_sc) tb.push_back(*r.t_sc);
    if (ta.empty() && tb.empty()) {
        rep.times = stats::KsResult{0.0, 1.0, 0, 0};
    } else if (ta.empty() || tb.empty()) {
        rep.times = stats::KsResult{1.0, 0.0, ta.size(), tb.size()};
    } else {
        rep.times = stats::ks_two_sample(ta, tb);
    }
    rep.pass = rep.outcomes.p > 0.01 && rep.times.p > 0.01;
    return rep;
}

// Standard vs objective running on disjoint seed blocks. The two modes are
// supposed to be empirically indistinguishable whenever an observer is
// part of the system.
inline ComparisonReport indistinguishability_test(const Scenario& sc, long n,
                                                  std::uint64_t base_seed,
                                                  const RunOptions& opts = {}) {
    const auto a =
        run_trajectories(sc, RuleMode{RuleVariant::Standard, true}, n, base_seed, opts);
    const auto b = run_trajectories(sc, RuleMode{RuleVariant::Objective, true}, n,
                                    base_seed + static_cast<std::uint64_t>(n), opts);
    return compare_records(a, b);
}

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    return out;
}

} // namespace detail

inline void write_outcomes_csv(const EnsembleStats& es, const std::string& path) {
    auto out = detail::open_out(path);
    out << "outcome,count,frequency\n";
    for (const auto& [key, count] : es.outcomes)
        out << key << ',' << count << ','
            << detail::fmt(static_cast<double>(count) / static_cast<double>(es.n))
            << '\n';
}

inline void write_histogram_csv(const stats::Histogram& h, const std::string& path) {
    auto out = detail::open_out(path);
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << detail::fmt(h.bin_lo(static_cast<int>(i))) << ','
            << detail::fmt(h.bin_hi(static_cast<int>(i))) << ',' << h.counts[i] << '\n';
}

// One row per recorded step; moduli and current columns are padded out to
// the final component count so the header stays fixed over spawns.
inline void write_trace_csv(const TrajectoryRecord& rec, int ncols,
                            const std::string& path) {
    if (ncols < 1) throw config_error("trace needs at least one component column");
    auto out = detail::open_out(path);
    out << "t,s";
    for (int i = 0; i < ncols; ++i) out << ",m" << i;
    for (int i = 0; i < ncols; ++i) out << ",J" << i;
    out << '\n';
    for (const auto& p : rec.trace) {
        out << detail::fmt(p.t) << ',' << detail::fmt(p.s);
        for (int i = 0; i < ncols; ++i)
            out << ','
                << detail::fmt(i < static_cast<int>(p.moduli.size()) ? p.moduli[i]
                                                                     : 0.0);
        for (int i = 0; i < ncols; ++i)
            out << ','
                << detail::fmt(i < static_cast<int>(p.currents.size()) ? p.currents[i]
                                                                       : 0.0);
        out << '\n';
    }
}

// One row per (snapshot, bin) pair so drift series plot directly.
inline void write_pulse_csv(const std::vector<std::pair<long, ConsciousPulse>>& snapshots,
                            const std::string& path) {
    auto out = detail::open_out(path);
    out << "step,bin,r_center,weight\n";
    for (const auto& [step, p] : snapshots)
        for (int i = 0; i < p.bins(); ++i)
            out << step << ',' << i << ',' << detail::fmt(p.center(i)) << ','
                << detail::fmt(p.weights[i]) << '\n';
}

inline void write_summary_json(const Scenario& sc, const RuleMode& mode, long n,
                               std::uint64_t base_seed, const EnsembleStats& es,
                               const std::string& path) {
    nlohmann::ordered_json doc;
    doc["scenario"] = sc.name;
    doc["mode"] = to_string(mode.variant);
    doc["rule4_enabled"] = mode.rule4_enabled && sc.rule4_enabled;
    doc["n"] = n;
    doc["base_seed"] = base_seed;
    nlohmann::ordered_json outcomes = nlohmann::ordered_json::object();
    for (const auto& [key, count] : es.outcomes) outcomes[key] = count;
    doc["outcomes"] = std::move(outcomes);
    doc["n_hit"] = es.n_hit;
    doc["mean_t_sc"] = es.mean_t_sc;
    doc["var_t_sc"] = es.var_t_sc;
    doc["forbidden_transitions"] = es.forbidden_transitions;
    doc["mean_final_c"] = es.mean_final_c;
    doc["mean_final_s"] = es.mean_final_s;
    nlohmann::ordered_json hist;
    hist["lo"] = es.t_sc_hist.lo;
    hist["hi"] = es.t_sc_hist.hi;
    hist["counts"] = es.t_sc_hist.counts;
    doc["t_sc_histogram"] = std::move(hist);

    auto out = detail::open_out(path);
    out << doc.dump(2) << '\n';
}

} // namespace readyrules
