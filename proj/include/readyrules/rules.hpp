#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "readyrules/statedyn.hpp"

namespace readyrules {

// Standard running uses the ready-brain reduction (rule 3). Objective
// running replaces it with reduction on locally incoherent components
// (rule 1a), promoting a ready brain factor in the chosen component
// without a second reduction (rule 3mod). Rule 4 masking applies to both
// and can be switched off to reproduce the two-observer anomaly.
enum class RuleVariant { Standard, Objective };

struct RuleMode {
    RuleVariant variant = RuleVariant::Standard;
    bool rule4_enabled = true;
};

inline const char* to_string(RuleVariant v) {
    return v == RuleVariant::Standard ? "standard" : "objective";
}

inline RuleVariant variant_from_string(const std::string& s) {
    if (s == "standard") return RuleVariant::Standard;
    if (s == "objective") return RuleVariant::Objective;
    throw config_error("unknown rule variant '" + s + "' (use standard or objective)");
}

enum class ReductionRule { Rule3, Rule1a, Rule3mod };

inline const char* to_string(ReductionRule r) {
    switch (r) {
        case ReductionRule::Rule3:    return "3";
        case ReductionRule::Rule1a:   return "1a";
        case ReductionRule::Rule3mod: return "3mod";
    }
    return "?";
}

struct ReductionEvent {
    double time = 0.0;
    int chosen = -1;
    ReductionRule rule = ReductionRule::Rule3;
    std::vector<int> zeroed;
    // True when the chosen component was coupled to its source through a
    // pair that rule 4 would mask. Can only happen with rule 4 disabled;
    // it marks the trajectory as carrying the impossible outcome.
    bool via_masked_pair = false;

    bool operator==(const ReductionEvent&) const = default;
};

// Canonical 53-bit uniform draw in [0, 1). Written out instead of using
// std::uniform_real_distribution so trajectories replay identically across
// standard library implementations.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Per-trajectory stochastic threshold. The accumulated hit probability c
// grows by hazard * dt each step; the first crossing of the pre-drawn
// threshold u fires a hit. After a reduction the caller re-arms with a
// fresh threshold so later observation phases can complete.
struct Trigger {
    double u = 1.0;
    double c = 0.0;

    void arm(std::mt19937_64& rng) {
        u = uniform01(rng);
        c = 0.0;
    }

    // Accumulate one increment; returns the crossing fraction within the
    // increment when the threshold is passed.
    std::optional<double> advance(double dc) {
        if (dc < 0.0)
            throw config_error("trigger accumulation must be nondecreasing");
        if (dc > 0.0 && c <= u && c + dc > u) {
            double f = (u - c) / dc;
            c += dc;
            return f;
        }
        c += dc;
        return std::nullopt;
    }
};

// Probability per unit time of a stochastic hit: the positive net currents
// into the subsystem components, divided by the total square modulus.
inline double hazard(const SystemState& st, const HamiltonianSchedule& sched,
                     const std::vector<int>& subsystem) {
    if (!(st.s > 0.0))
        throw model_error("hazard undefined: total square modulus is zero");
    std::vector<double> J = net_currents(st, sched);
    double total = 0.0;
    for (int n : subsystem) {
        if (n < 0 || n >= st.size())
            throw config_error("hazard: subsystem index " + std::to_string(n) +
                               " out of range");
        if (st.components[n].zeroed) continue;
        if (J[n] > 0.0) total += J[n];
    }
    return total / st.s;
}

// Which components a hit may land on. Under the standard rules the hit
// must find a ready brain factor; under objective running it must find a
// locally incoherent component.
inline bool hit_eligible(const Component& c, const RuleMode& mode) {
    if (c.zeroed) return false;
    if (mode.variant == RuleVariant::Objective) return c.incoherent;
    for (const auto& f : c.labels)
        if (f.is_brain() && f.status == BrainStatus::Ready) return true;
    return false;
}

inline std::vector<int> eligible_components(const SystemState& st, const RuleMode& mode,
                                            const std::vector<int>* subsystem = nullptr) {
    std::vector<int> out;
    auto consider = [&](int i) {
        if (hit_eligible(st.components[i], mode)) out.push_back(i);
    };
    if (subsystem) {
        for (int i : *subsystem) {
            if (i < 0 || i >= st.size())
                throw config_error("subsystem index " + std::to_string(i) + " out of range");
            consider(i);
        }
    } else {
        for (int i = 0; i < st.size(); ++i) consider(i);
    }
    return out;
}

// Choose the hit component among the eligible ones, weighted by their
// positive net currents.
inline int select_component(const std::vector<double>& J, const std::vector<int>& eligible,
                            std::mt19937_64& rng) {
    double total = 0.0;
    for (int n : eligible)
        if (J[n] > 0.0) total += J[n];
    if (!(total > 0.0))
        throw rule_error("no receiving component available for the hit");
    double r = uniform01(rng) * total;
    int last = -1;
    for (int n : eligible) {
        if (J[n] <= 0.0) continue;
        last = n;
        r -= J[n];
        if (r < 0.0) return n;
    }
    return last;
}

struct Hit {
    int component = -1;
    double fraction = 0.0; // position of the crossing within the step
};

template <class Currents>
std::optional<Hit> advance_trigger(Trigger& trigger, double hazard_value, double dt,
                                   const SystemState& st, const Currents& J,
                                   const std::vector<int>& eligible, std::mt19937_64& rng) {
    (void)st;
    if (hazard_value * dt >= 0.1)
        throw config_error("time step too coarse: hazard * dt must stay below 0.1");
    auto fraction = trigger.advance(hazard_value * dt);
    if (!fraction) return std::nullopt;
    return Hit{select_component(J, eligible, rng), *fraction};
}

// Rule 2. Append discontinuously created components with amplitude exactly
// zero. Active brain factors (conscious or ready) in discontinuously
// created components are stamped Ready; unconscious and unknown factors
// are left alone, since only active states are constrained. Returns the
// indices of the new components.
inline std::vector<int> apply_rule2(SystemState& st, std::vector<Component> new_components,
                                    bool discontinuous) {
    std::vector<int> indices;
    for (auto& c : new_components) {
        if (c.amplitude != cplx{0.0, 0.0})
            throw rule_error("new components must be created with amplitude exactly 0");
        if (discontinuous)
            for (auto& f : c.labels)
                if (f.active()) f.status = BrainStatus::Ready;
        c.birth_time = st.time;
        c.zeroed = false;
        validate_component(c);
        indices.push_back(st.size());
        st.components.push_back(std::move(c));
    }
    return indices;
}

namespace detail {

inline std::vector<int> zero_all_others(SystemState& st, int keep) {
    std::vector<int> zeroed;
    for (int i = 0; i < st.size(); ++i) {
        if (i == keep || st.components[i].zeroed) continue;
        st.components[i].amplitude = cplx{0.0, 0.0};
        st.components[i].zeroed = true;
        zeroed.push_back(i);
    }
    st.refresh_s();
    return zeroed;
}

inline int promote_ready(Component& c) {
    int promoted = 0;
    for (auto& f : c.labels)
        if (f.is_brain() && f.status == BrainStatus::Ready) {
            f.status = BrainStatus::Conscious;
            ++promoted;
        }
    return promoted;
}

} // namespace detail

// Rule 3. The hit component must hold a ready brain factor; that factor
// (all of them, if several observers are ready there) becomes conscious
// and every other component is reduced to zero. The surviving square
// modulus is whatever the component held at the hit; nothing renormalizes.
inline ReductionEvent apply_rule3(SystemState& st, int hit) {
    if (hit < 0 || hit >= st.size())
        throw config_error("rule 3 hit index out of range");
    Component& comp = st.components[hit];
    if (comp.zeroed) throw rule_error("rule 3 hit on a zeroed component");

    ReductionEvent ev;
    ev.time = st.time;
    ev.chosen = hit;
    ev.rule = ReductionRule::Rule3;
    if (detail::promote_ready(comp) == 0)
        throw rule_error("rule 3 hit on a component with no ready brain factor");
    ev.zeroed = detail::zero_all_others(st, hit);
    return ev;
}

// Rule 1a with rule 3mod. The hit component must be locally incoherent;
// every other component is reduced to zero, and a ready brain factor in
// the chosen component becomes conscious without a second reduction.
inline ReductionEvent apply_rule1a(SystemState& st, int hit) {
    if (hit < 0 || hit >= st.size())
        throw config_error("rule 1a hit index out of range");
    Component& comp = st.components[hit];
    if (comp.zeroed) throw rule_error("rule 1a hit on a zeroed component");
    if (!comp.incoherent)
        throw rule_error("rule 1a hit on a component that is not locally incoherent");

    ReductionEvent ev;
    ev.time = st.time;
    ev.chosen = hit;
    ev.rule = detail::promote_ready(comp) > 0 ? ReductionRule::Rule3mod
                                              : ReductionRule::Rule1a;
    ev.zeroed = detail::zero_all_others(st, hit);
    return ev;
}

// Rule 4. Two components that both hold a Ready brain factor for the same
// (observer, brain state) pair may not exchange square modulus; their
// coupling is masked. Recomputed whenever a status changes.
inline std::set<std::pair<int, int>> rule4_pairs(const SystemState& st) {
    std::set<std::pair<int, int>> pairs;
    const int n = st.size();
    for (int m = 0; m < n; ++m) {
        for (const auto& f : st.components[m].labels) {
            if (!f.is_brain() || f.status != BrainStatus::Ready) continue;
            for (int k = m + 1; k < n; ++k) {
                for (const auto& g : st.components[k].labels) {
                    if (g.is_brain() && g.status == BrainStatus::Ready &&
                        g.observer == f.observer && g.state == f.state) {
                        pairs.insert(HamiltonianSchedule::pair_key(m, k));
                    }
                }
            }
        }
    }
    return pairs;
}

inline void apply_rule4_mask(const SystemState& st, HamiltonianSchedule& sched,
                             bool enabled) {
    sched.mask = enabled ? rule4_pairs(st) : std::set<std::pair<int, int>>{};
}

// One conscious brain state per observer across the components with
// positive square modulus. Checked after every step in audited runs.
inline bool everett_ok(const SystemState& st) {
    std::map<int, std::set<int>> conscious;
    for (const auto& c : st.components) {
        if (c.zeroed || c.modulus() == 0.0) continue;
        for (const auto& f : c.labels)
            if (f.is_brain() && f.status == BrainStatus::Conscious)
                conscious[f.observer].insert(f.state);
    }
    for (const auto& [obs, states] : conscious)
        if (states.size() > 1) return false;
    return true;
}

} // namespace readyrules
