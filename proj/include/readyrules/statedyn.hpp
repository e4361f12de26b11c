#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "readyrules/errors.hpp"
#include "readyrules/labels.hpp"

namespace readyrules {

using cplx = std::complex<double>;

// One branch of the superposition. The amplitude of a zeroed component is
// pinned at exactly 0 and it no longer takes part in evolution, currents or
// the total square modulus. It stays in the list so trajectory audits can
// see the full history.
struct Component {
    cplx amplitude{0.0, 0.0};
    std::vector<FactorLabel> labels;
    bool incoherent = false;
    bool zeroed = false;
    double birth_time = 0.0;

    double modulus() const { return std::norm(amplitude); }

    bool operator==(const Component&) const = default;

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (i) out += ' ';
            out += labels[i].str();
        }
        return out;
    }
};

// A component may carry at most one brain factor per observer.
inline void validate_component(const Component& c) {
    std::set<int> seen;
    for (const auto& f : c.labels) {
        if (!f.is_brain()) continue;
        if (!seen.insert(f.observer).second)
            throw config_error("component '" + c.str() +
                               "' carries more than one brain factor for observer " +
                               std::to_string(f.observer));
    }
}

struct SystemState {
    std::vector<Component> components;
    double time = 0.0;
    double s = 0.0; // total square modulus of the live components

    int size() const { return static_cast<int>(components.size()); }

    double refresh_s() {
        double total = 0.0;
        for (const auto& c : components)
            if (!c.zeroed) total += c.modulus();
        s = total;
        return s;
    }

    // Live components joined with " + ", used as the outcome key of a
    // finished trajectory.
    std::string outcome_key() const {
        std::string out;
        bool first = true;
        for (const auto& c : components) {
            if (c.zeroed) continue;
            if (!first) out += " + ";
            out += c.str();
            first = false;
        }
        return out;
    }
};

inline double square_modulus(const SystemState& st, const std::vector<int>& subset) {
    double total = 0.0;
    for (int idx : subset) {
        if (idx < 0 || idx >= st.size())
            throw config_error("square_modulus: component index " + std::to_string(idx) +
                               " out of range");
        const auto& c = st.components[idx];
        if (!c.zeroed) total += c.modulus();
    }
    return total;
}

// One off-diagonal coupling of the Hamiltonian, active on [t_start, t_end).
// Entries are stored with row < col; the conjugate partner is implied.
struct CouplingEntry {
    int row = 0;
    int col = 0;
    cplx g{0.0, 0.0}; // rad/s
    double t_start = 0.0;
    double t_end = 0.0;

    bool active_at(double t) const { return t >= t_start && t < t_end; }
    bool overlaps(double a, double b) const { return t_start < b && t_end > a; }
    bool operator==(const CouplingEntry&) const = default;
};

// Windowed Hermitian coupling schedule plus a mask of pairs whose coupling
// is forced to zero (rule 4 masking, recomputed by the caller whenever
// brain statuses change).
struct HamiltonianSchedule {
    std::vector<CouplingEntry> entries;
    std::set<std::pair<int, int>> mask;

    bool operator==(const HamiltonianSchedule&) const = default;

    static std::pair<int, int> pair_key(int a, int b) {
        return {std::min(a, b), std::max(a, b)};
    }

    bool masked(int a, int b) const { return mask.count(pair_key(a, b)) != 0; }

    // Declaring both directions of a pair is allowed when the second
    // declaration is the exact conjugate over the same window. Anything
    // else that overlaps an existing window for the same pair is rejected.
    void add(int row, int col, cplx g, double t_start, double t_end) {
        if (row < 0 || col < 0) throw config_error("coupling indices must be nonnegative");
        if (!(t_end > t_start))
            throw config_error("coupling window [" + std::to_string(t_start) + ", " +
                               std::to_string(t_end) + ") is empty");
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
            throw config_error("coupling strength must be finite");
        if (row == col && std::abs(g.imag()) > 0.0)
            throw config_error("diagonal coupling must be real to keep the matrix Hermitian");

        CouplingEntry e;
        e.row = std::min(row, col);
        e.col = std::max(row, col);
        e.g = (row <= col) ? g : std::conj(g);
        e.t_start = t_start;
        e.t_end = t_end;

        for (const auto& other : entries) {
            if (other.row != e.row || other.col != e.col) continue;
            if (!other.overlaps(t_start, t_end)) continue;
            if (other.t_start == t_start && other.t_end == t_end && other.g == e.g)
                return; // conjugate or repeated declaration of the same entry
            if (other.t_start == t_start && other.t_end == t_end)
                throw config_error("couplings for pair (" + std::to_string(e.row) + ", " +
                                   std::to_string(e.col) + ") are not Hermitian-consistent");
            throw config_error("overlapping windows for coupling pair (" +
                               std::to_string(e.row) + ", " + std::to_string(e.col) + ")");
        }
        entries.push_back(e);
    }

    // Close the active window of every entry for a pair at time t.
    void end_window(int row, int col, double t) {
        auto key = pair_key(row, col);
        for (auto& e : entries) {
            if (pair_key(e.row, e.col) != key) continue;
            e.t_end = std::max(e.t_start, std::min(e.t_end, t));
        }
    }

    // Strongest coupling whose window intersects [a, b); 0 if none.
    double max_strength_in(double a, double b) const {
        double m = 0.0;
        for (const auto& e : entries)
            if (e.overlaps(a, b)) m = std::max(m, std::abs(e.g));
        return m;
    }

    // All window edges, used by the stepper to keep steps from straddling
    // an activation boundary.
    std::vector<double> window_edges() const {
        std::vector<double> edges;
        for (const auto& e : entries) {
            edges.push_back(e.t_start);
            edges.push_back(e.t_end);
        }
        return edges;
    }
};

// Dense n x n effective matrix at time t. Entries touching a zeroed
// component or a masked pair contribute nothing.
inline void assemble_matrix(const SystemState& st, const HamiltonianSchedule& sched,
                            double t, std::vector<cplx>& H) {
    const int n = st.size();
    H.assign(static_cast<std::size_t>(n) * n, cplx{0.0, 0.0});
    for (const auto& e : sched.entries) {
        if (!e.active_at(t)) continue;
        if (e.row >= n || e.col >= n)
            throw config_error("coupling pair (" + std::to_string(e.row) + ", " +
                               std::to_string(e.col) + ") exceeds the component count");
        if (st.components[e.row].zeroed || st.components[e.col].zeroed) continue;
        if (sched.masked(e.row, e.col)) continue;
        H[static_cast<std::size_t>(e.row) * n + e.col] += e.g;
        if (e.row != e.col)
            H[static_cast<std::size_t>(e.col) * n + e.row] += std::conj(e.g);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            cplx a = H[static_cast<std::size_t>(i) * n + j];
            cplx b = H[static_cast<std::size_t>(j) * n + i];
            if (std::abs(a - std::conj(b)) > 1e-12)
                throw config_error("effective matrix is not Hermitian at t = " +
                                   std::to_string(t));
        }
}

inline std::vector<cplx> effective_matrix(const SystemState& st,
                                          const HamiltonianSchedule& sched) {
    std::vector<cplx> H;
    assemble_matrix(st, sched, st.time, H);
    return H;
}

// Probability currents. J(n<-m) = 2 Im(conj(c_n) H_nm c_m) is the rate at
// which square modulus flows from m into n; the net current J_n equals
// d|c_n|^2/dt and the currents over all live components sum to zero.
inline void net_currents_into(const SystemState& st, const std::vector<cplx>& H,
                              std::vector<double>& out) {
    const int n = st.size();
    out.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (st.components[i].zeroed) continue;
        const cplx ci = std::conj(st.components[i].amplitude);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const cplx h = H[static_cast<std::size_t>(i) * n + j];
            if (h == cplx{0.0, 0.0}) continue;
            acc += 2.0 * std::imag(ci * h * st.components[j].amplitude);
        }
        out[i] = acc;
    }
}

inline std::vector<double> net_currents(const SystemState& st,
                                        const HamiltonianSchedule& sched) {
    std::vector<cplx> H;
    assemble_matrix(st, sched, st.time, H);
    std::vector<double> out;
    net_currents_into(st, H, out);
    return out;
}

// Full pairwise current table, row-major; entry [n*size + m] is J(n<-m).
inline std::vector<double> current_matrix(const SystemState& st,
                                          const HamiltonianSchedule& sched) {
    std::vector<cplx> H;
    assemble_matrix(st, sched, st.time, H);
    const int n = st.size();
    std::vector<double> J(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (st.components[i].zeroed) continue;
        const cplx ci = std::conj(st.components[i].amplitude);
        for (int j = 0; j < n; ++j) {
            const cplx h = H[static_cast<std::size_t>(i) * n + j];
            if (h == cplx{0.0, 0.0}) continue;
            J[static_cast<std::size_t>(i) * n + j] =
                2.0 * std::imag(ci * h * st.components[j].amplitude);
        }
    }
    return J;
}

// Scratch buffers reused across steps so the inner loop never allocates.
struct StepWorkspace {
    std::vector<cplx> H;
    std::vector<cplx> k1, k2, k3, k4, y;
    std::vector<double> J;

    void resize(int n) {
        const std::size_t un = static_cast<std::size_t>(n);
        if (k1.size() != un) {
            k1.resize(un);
            k2.resize(un);
            k3.resize(un);
            k4.resize(un);
            y.resize(un);
            J.resize(un);
        }
    }
};

namespace detail {

// k = -i H y
inline void derivative(const std::vector<cplx>& H, const std::vector<cplx>& y,
                       std::vector<cplx>& k) {
    const int n = static_cast<int>(y.size());
    for (int i = 0; i < n; ++i) {
        cplx acc{0.0, 0.0};
        const cplx* row = H.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            if (row[j] != cplx{0.0, 0.0}) acc += row[j] * y[j];
        }
        k[i] = cplx{0.0, -1.0} * acc;
    }
}

// Hazard (sum of positive net currents over the eligible set, divided by s)
// evaluated on a stage amplitude vector.
inline double stage_hazard(const std::vector<cplx>& H, const std::vector<cplx>& y,
                           const std::vector<int>& eligible, double s) {
    const int n = static_cast<int>(y.size());
    double total = 0.0;
    for (int i : eligible) {
        const cplx* row = H.data() + static_cast<std::size_t>(i) * n;
        const cplx ci = std::conj(y[i]);
        double j_net = 0.0;
        for (int j = 0; j < n; ++j) {
            if (row[j] != cplx{0.0, 0.0}) j_net += 2.0 * std::imag(ci * row[j] * y[j]);
        }
        if (j_net > 0.0) total += j_net;
    }
    return total / s;
}

} // namespace detail

// One fixed-step RK4 step of i dc/dt = H c with H held constant over the
// step. When an eligible set is given, the hazard is integrated through the
// same stages (Simpson weights), which keeps the accumulated hit
// probability consistent with the amplitudes to fourth order. Returns that
// hazard integral, 0 when eligible is null or empty.
inline double rk4_step(SystemState& st, const std::vector<cplx>& H, double dt,
                       const std::vector<int>* eligible, double s, StepWorkspace& ws) {
    const int n = st.size();
    ws.resize(n);
    const bool want_hazard = eligible && !eligible->empty();
    if (want_hazard && !(s > 0.0))
        throw model_error("hazard undefined for a state with zero total square modulus");

    for (int i = 0; i < n; ++i) ws.y[i] = st.components[i].amplitude;

    double h1 = 0.0, h2 = 0.0, h3 = 0.0, h4 = 0.0;
    if (want_hazard) h1 = detail::stage_hazard(H, ws.y, *eligible, s);
    detail::derivative(H, ws.y, ws.k1);

    for (int i = 0; i < n; ++i) ws.y[i] = st.components[i].amplitude + 0.5 * dt * ws.k1[i];
    if (want_hazard) h2 = detail::stage_hazard(H, ws.y, *eligible, s);
    detail::derivative(H, ws.y, ws.k2);

    for (int i = 0; i < n; ++i) ws.y[i] = st.components[i].amplitude + 0.5 * dt * ws.k2[i];
    if (want_hazard) h3 = detail::stage_hazard(H, ws.y, *eligible, s);
    detail::derivative(H, ws.y, ws.k3);

    for (int i = 0; i < n; ++i) ws.y[i] = st.components[i].amplitude + dt * ws.k3[i];
    if (want_hazard) h4 = detail::stage_hazard(H, ws.y, *eligible, s);
    detail::derivative(H, ws.y, ws.k4);

    for (int i = 0; i < n; ++i) {
        if (st.components[i].zeroed) continue;
        st.components[i].amplitude +=
            (dt / 6.0) * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
    return (dt / 6.0) * (h1 + 2.0 * h2 + 2.0 * h3 + h4);
}

inline void check_finite(const SystemState& st) {
    for (const auto& c : st.components) {
        if (!std::isfinite(c.amplitude.real()) || !std::isfinite(c.amplitude.imag()))
            throw numerical_error("amplitude became non-finite at t = " +
                                  std::to_string(st.time));
    }
}

// One integrator step against the schedule as seen at the current time.
// The caller picks dt; steps must not straddle a window edge (the
// trajectory runner segments time so they never do).
inline void evolve(SystemState& st, const HamiltonianSchedule& sched, double dt) {
    StepWorkspace ws;
    assemble_matrix(st, sched, st.time, ws.H);
    rk4_step(st, ws.H, dt, nullptr, 1.0, ws);
    st.time += dt;
    check_finite(st);
    st.refresh_s();
}

} // namespace readyrules
