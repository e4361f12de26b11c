#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "readyrules/statedyn.hpp"

namespace readyrules {

// Components appended mid-run. Spawned components always start at
// amplitude zero; the attached couplings are what let them fill up.
struct SpawnSpec {
    std::vector<Component> components;
    bool discontinuous = false;
    std::vector<CouplingEntry> couplings;

    bool operator==(const SpawnSpec&) const = default;
};

struct EndWindowSpec {
    int row = 0;
    int col = 0;

    bool operator==(const EndWindowSpec&) const = default;
};

struct SetIncoherentSpec {
    std::vector<int> indices;

    bool operator==(const SetIncoherentSpec&) const = default;
};

struct ScenarioEvent {
    double t = 0.0;
    std::variant<SpawnSpec, EndWindowSpec, SetIncoherentSpec> action;

    bool operator==(const ScenarioEvent&) const = default;
};

struct Scenario {
    std::string name = "custom";
    std::vector<Component> initial;
    HamiltonianSchedule schedule;
    std::vector<ScenarioEvent> events;
    double duration = 0.0;
    std::vector<int> subsystem; // empty means the whole system
    bool rule4_enabled = true;

    bool operator==(const Scenario&) const = default;

    int final_component_count() const {
        int n = static_cast<int>(initial.size());
        for (const auto& ev : events)
            if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action))
                n += static_cast<int>(spawn->components.size());
        return n;
    }

    void validate() const {
        if (initial.empty()) throw config_error("scenario has no components");
        if (!(duration > 0.0) || !std::isfinite(duration))
            throw config_error("scenario duration must be positive and finite");
        for (std::size_t i = 0; i < initial.size(); ++i) {
            const auto& c = initial[i];
            if (!std::isfinite(c.amplitude.real()) || !std::isfinite(c.amplitude.imag()))
                throw config_error("component " + std::to_string(i) +
                                   " has a non-finite amplitude");
            if (c.zeroed)
                throw config_error("component " + std::to_string(i) +
                                   " cannot start zeroed");
            validate_component(c);
        }

        // Walk the timeline once, tracking when each component index comes
        // into existence and re-running every coupling through schedule
        // validation.
        std::vector<double> born(initial.size(), 0.0);
        HamiltonianSchedule trial = schedule;
        double prev_t = 0.0;
        for (std::size_t k = 0; k < events.size(); ++k) {
            const auto& ev = events[k];
            const std::string where = "event " + std::to_string(k);
            if (!(ev.t > 0.0) || !(ev.t < duration))
                throw config_error(where + ": time must lie strictly inside (0, duration)");
            if (ev.t < prev_t) throw config_error("events must be ordered by time");
            prev_t = ev.t;

            const int n = static_cast<int>(born.size());
            if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action)) {
                if (spawn->components.empty())
                    throw config_error(where + ": spawn adds no components");
                for (const auto& c : spawn->components) {
                    if (c.amplitude != cplx{0.0, 0.0})
                        throw config_error(where +
                                           ": spawned components must start at amplitude 0");
                    validate_component(c);
                    born.push_back(ev.t);
                }
                const int grown = static_cast<int>(born.size());
                for (const auto& e : spawn->couplings) {
                    if (e.row < 0 || e.col < 0 || e.row >= grown || e.col >= grown)
                        throw config_error(where + ": coupling index out of range");
                    if (e.t_start < std::max(born[e.row], born[e.col]))
                        throw config_error(where + ": coupling window opens before both "
                                                   "components exist");
                    trial.add(e.row, e.col, e.g, e.t_start, e.t_end);
                }
            } else if (const auto* end = std::get_if<EndWindowSpec>(&ev.action)) {
                if (end->row < 0 || end->col < 0 || end->row >= n || end->col >= n)
                    throw config_error(where + ": end_window index out of range");
            } else if (const auto* inc = std::get_if<SetIncoherentSpec>(&ev.action)) {
                for (int idx : inc->indices)
                    if (idx < 0 || idx >= n)
                        throw config_error(where + ": set_incoherent index out of range");
            }
        }

        const int total = static_cast<int>(born.size());
        for (const auto& e : schedule.entries) {
            if (e.row >= total || e.col >= total)
                throw config_error("coupling pair (" + std::to_string(e.row) + ", " +
                                   std::to_string(e.col) +
                                   ") exceeds the component count");
            if (e.t_start < std::max(born[e.row], born[e.col]))
                throw config_error("coupling (" + std::to_string(e.row) + ", " +
                                   std::to_string(e.col) +
                                   ") becomes active before both components exist");
        }
        std::vector<int> seen;
        for (int idx : subsystem) {
            if (idx < 0 || idx >= total)
                throw config_error("subsystem index " + std::to_string(idx) +
                                   " out of range");
            if (std::count(seen.begin(), seen.end(), idx))
                throw config_error("subsystem lists index " + std::to_string(idx) +
                                   " twice");
            seen.push_back(idx);
        }
    }
};

// Knobs shared by the built-in experiments. The capture stage transfers
// sin²(g·T) of square modulus in the two-component layout, 3/4 with the
// defaults; the physiological observation runs much faster and completes
// a full transfer over its window.
struct ScenarioParams {
    double capture_coupling = 1.0;             // rad/s
    double capture_window = std::numbers::pi / 3.0; // s
    double observe_coupling = 20.0;            // rad/s
    double observe_gap = 0.2;                  // s between capture end and look
    double internal_coupling = 0.7;            // rad/s, internal alarm channel

    double observe_window() const { return std::numbers::pi / (2.0 * observe_coupling); }

    bool operator==(const ScenarioParams&) const = default;
};

inline std::vector<std::string> catalog_names() {
    return {"detector_only",      "observer_on_board", "terminal_observation",
            "two_observers",      "two_observers_no_rule4",
            "cat_version_I",      "cat_version_II",    "cat_internal_alarm"};
}

namespace detail {

inline Component comp(cplx amp, std::vector<FactorLabel> labels, bool incoherent) {
    return Component{amp, std::move(labels), incoherent, false, 0.0};
}

inline CouplingEntry entry(int row, int col, double g, double t_start, double t_end) {
    return CouplingEntry{row, col, cplx{g, 0.0}, t_start, t_end};
}

} // namespace detail

inline Scenario build(const std::string& name, const ScenarioParams& p = {}) {
    if (!(p.capture_coupling > 0.0) || !(p.capture_window > 0.0) ||
        !(p.observe_coupling > 0.0) || !(p.internal_coupling > 0.0))
        throw config_error("scenario parameters must be positive");

    const double tf = p.capture_window;
    const double t_ob = tf + p.observe_gap;
    const double olen = p.observe_window();

    auto need_gap = [&]() {
        if (!(t_ob > tf))
            throw config_error(name + ": the observation must start after the capture "
                                      "window closes");
    };

    using detail::comp;
    using detail::entry;
    using FL = FactorLabel;

    Scenario s;
    s.name = name;

    if (name == "detector_only") {
        s.initial = {comp(cplx{1.0, 0.0}, {FL::particle(), FL::detector(0)}, true),
                     comp(cplx{0.0, 0.0}, {FL::detector(1)}, true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        s.duration = tf + 0.1;
    } else if (name == "observer_on_board") {
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::particle(), FL::detector(0),
                           FL::brain(0, 0, BrainStatus::Conscious)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, 1, BrainStatus::Ready)}, true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        s.duration = tf + 0.1;
    } else if (name == "terminal_observation") {
        need_gap();
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::particle(), FL::detector(0),
                           FL::brain(0, -1, BrainStatus::Unknown)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, -1, BrainStatus::Unknown)}, true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        SpawnSpec spawn;
        spawn.discontinuous = true;
        spawn.components = {comp(cplx{0.0, 0.0},
                                 {FL::particle(true), FL::detector(0),
                                  FL::brain(0, 0, BrainStatus::Ready)},
                                 true),
                            comp(cplx{0.0, 0.0},
                                 {FL::detector(1, true),
                                  FL::brain(0, 1, BrainStatus::Ready)},
                                 true)};
        spawn.couplings = {entry(0, 2, p.observe_coupling, t_ob, t_ob + olen),
                           entry(1, 3, p.observe_coupling, t_ob, t_ob + olen)};
        s.events.push_back({t_ob, spawn});
        s.duration = t_ob + olen + 0.1;
    } else if (name == "two_observers" || name == "two_observers_no_rule4") {
        need_gap();
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::particle(), FL::detector(0),
                           FL::brain(0, 0, BrainStatus::Conscious),
                           FL::brain(1, -1, BrainStatus::Unknown)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, 1, BrainStatus::Ready),
                           FL::brain(1, -1, BrainStatus::Unknown)},
                          true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        SpawnSpec spawn;
        spawn.discontinuous = true;
        // The conscious factor in the no-capture branch arrives ready, by
        // the discontinuous-creation stamp.
        spawn.components = {comp(cplx{0.0, 0.0},
                                 {FL::particle(true), FL::detector(0),
                                  FL::brain(0, 0, BrainStatus::Conscious),
                                  FL::brain(1, 0, BrainStatus::Ready)},
                                 true),
                            comp(cplx{0.0, 0.0},
                                 {FL::detector(1, true),
                                  FL::brain(0, 1, BrainStatus::Ready),
                                  FL::brain(1, 1, BrainStatus::Ready)},
                                 true)};
        spawn.couplings = {entry(0, 2, p.observe_coupling, t_ob, t_ob + olen),
                           entry(1, 3, p.observe_coupling, t_ob, t_ob + olen)};
        s.events.push_back({t_ob, spawn});
        s.duration = t_ob + olen + 0.1;
        s.rule4_enabled = (name == "two_observers");
    } else if (name == "cat_version_I") {
        need_gap();
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::detector(0), FL::brain(0, 0, BrainStatus::Conscious)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, 1, BrainStatus::Unconscious)},
                          true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        SpawnSpec spawn;
        spawn.discontinuous = true;
        spawn.components = {comp(cplx{0.0, 0.0},
                                 {FL::detector(0, true),
                                  FL::brain(0, 0, BrainStatus::Conscious),
                                  FL::brain(1, 0, BrainStatus::Ready)},
                                 true),
                            comp(cplx{0.0, 0.0},
                                 {FL::detector(1, true),
                                  FL::brain(0, 1, BrainStatus::Unconscious),
                                  FL::brain(1, 1, BrainStatus::Ready)},
                                 true)};
        spawn.couplings = {entry(0, 2, p.observe_coupling, t_ob, t_ob + olen),
                           entry(1, 3, p.observe_coupling, t_ob, t_ob + olen)};
        s.events.push_back({t_ob, spawn});
        s.duration = t_ob + olen + 0.1;
    } else if (name == "cat_version_II") {
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::detector(0), FL::brain(0, 0, BrainStatus::Unconscious)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, 1, BrainStatus::Ready)}, true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        s.duration = tf + 0.1;
    } else if (name == "cat_internal_alarm") {
        s.initial = {comp(cplx{1.0, 0.0},
                          {FL::detector(0), FL::brain(0, 0, BrainStatus::Unconscious)},
                          true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(1), FL::brain(0, 1, BrainStatus::Ready)}, true),
                     comp(cplx{0.0, 0.0},
                          {FL::detector(0), FL::brain(0, 2, BrainStatus::Ready)}, true)};
        s.schedule.add(0, 1, cplx{p.capture_coupling, 0.0}, 0.0, tf);
        s.schedule.add(0, 2, cplx{p.internal_coupling, 0.0}, 0.0, tf);
        s.duration = tf + 0.1;
    } else {
        std::string names;
        for (const auto& n : catalog_names()) names += (names.empty() ? "" : ", ") + n;
        throw config_error("unknown scenario '" + name + "'; available: " + names);
    }

    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// File format. A scenario is one JSON document; see load() for the error
// contract. Every message carries the path of the offending field.

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                           const std::string& path) {
    if (!j.is_object()) throw parse_error(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw parse_error(path + "." + key + ": missing required field");
    return *it;
}

inline double as_number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) throw parse_error(path + ": expected a number");
    return j.get<double>();
}

inline int as_int(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer()) throw parse_error(path + ": expected an integer");
    return j.get<int>();
}

inline bool as_bool(const nlohmann::json& j, const std::string& path) {
    if (!j.is_boolean()) throw parse_error(path + ": expected a boolean");
    return j.get<bool>();
}

inline std::string as_string(const nlohmann::json& j, const std::string& path) {
    if (!j.is_string()) throw parse_error(path + ": expected a string");
    return j.get<std::string>();
}

inline const nlohmann::json& as_array(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array()) throw parse_error(path + ": expected an array");
    return j;
}

inline FactorLabel label_from_json(const nlohmann::json& j, const std::string& path) {
    const std::string kind = as_string(require_field(j, "kind", path), path + ".kind");
    const bool primed =
        j.contains("primed") ? as_bool(j["primed"], path + ".primed") : false;
    if (kind == "particle") return FactorLabel::particle(primed);
    if (kind == "detector") {
        const int mode = as_int(require_field(j, "mode", path), path + ".mode");
        try {
            return FactorLabel::detector(mode, primed);
        } catch (const config_error& e) {
            throw parse_error(path + ".mode: " + e.what());
        }
    }
    if (kind == "brain") {
        const int observer = as_int(require_field(j, "observer", path), path + ".observer");
        const int state = as_int(require_field(j, "state", path), path + ".state");
        const std::string status =
            as_string(require_field(j, "status", path), path + ".status");
        try {
            return FactorLabel::brain(observer, state, brain_status_from_string(status));
        } catch (const validation_error& e) {
            throw parse_error(path + ": " + e.what());
        }
    }
    throw parse_error(path + ".kind: unknown kind '" + kind + "'");
}

inline nlohmann::ordered_json label_to_json(const FactorLabel& f) {
    nlohmann::ordered_json j;
    switch (f.kind) {
        case FactorLabel::Kind::Particle:
            j["kind"] = "particle";
            break;
        case FactorLabel::Kind::Detector:
            j["kind"] = "detector";
            j["mode"] = f.mode;
            break;
        case FactorLabel::Kind::Brain:
            j["kind"] = "brain";
            j["observer"] = f.observer;
            j["state"] = f.state;
            j["status"] = to_string(f.status);
            break;
    }
    if (f.primed) j["primed"] = true;
    return j;
}

inline Component component_from_json(const nlohmann::json& j, const std::string& path,
                                     bool spawned) {
    Component c;
    const auto& labels = as_array(require_field(j, "labels", path), path + ".labels");
    if (labels.empty()) throw parse_error(path + ".labels: must not be empty");
    for (std::size_t i = 0; i < labels.size(); ++i)
        c.labels.push_back(
            label_from_json(labels[i], path + ".labels[" + std::to_string(i) + "]"));

    double re = 0.0, im = 0.0;
    if (spawned) {
        if (j.contains("amplitude_re")) re = as_number(j["amplitude_re"], path + ".amplitude_re");
        if (j.contains("amplitude_im")) im = as_number(j["amplitude_im"], path + ".amplitude_im");
        if (re != 0.0 || im != 0.0)
            throw parse_error(path + ": spawned components must start at amplitude 0");
    } else {
        re = as_number(require_field(j, "amplitude_re", path), path + ".amplitude_re");
        im = as_number(require_field(j, "amplitude_im", path), path + ".amplitude_im");
    }
    c.amplitude = cplx{re, im};
    if (j.contains("incoherent"))
        c.incoherent = as_bool(j["incoherent"], path + ".incoherent");
    try {
        validate_component(c);
    } catch (const config_error& e) {
        throw parse_error(path + ": " + e.what());
    }
    return c;
}

inline nlohmann::ordered_json component_to_json(const Component& c) {
    nlohmann::ordered_json j;
    j["labels"] = nlohmann::ordered_json::array();
    for (const auto& f : c.labels) j["labels"].push_back(label_to_json(f));
    j["amplitude_re"] = c.amplitude.real();
    j["amplitude_im"] = c.amplitude.imag();
    j["incoherent"] = c.incoherent;
    return j;
}

inline CouplingEntry coupling_from_json(const nlohmann::json& j, const std::string& path) {
    const int row = as_int(require_field(j, "row", path), path + ".row");
    const int col = as_int(require_field(j, "col", path), path + ".col");
    const double g_re = as_number(require_field(j, "g_re", path), path + ".g_re");
    const double g_im = as_number(require_field(j, "g_im", path), path + ".g_im");
    const double t_start = as_number(require_field(j, "t_start", path), path + ".t_start");
    const double t_end = as_number(require_field(j, "t_end", path), path + ".t_end");
    try {
        HamiltonianSchedule probe;
        probe.add(row, col, cplx{g_re, g_im}, t_start, t_end);
        return probe.entries.front();
    } catch (const config_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline nlohmann::ordered_json coupling_to_json(const CouplingEntry& e) {
    nlohmann::ordered_json j;
    j["row"] = e.row;
    j["col"] = e.col;
    j["g_re"] = e.g.real();
    j["g_im"] = e.g.imag();
    j["t_start"] = e.t_start;
    j["t_end"] = e.t_end;
    return j;
}

inline ScenarioEvent event_from_json(const nlohmann::json& j, const std::string& path) {
    ScenarioEvent ev;
    ev.t = as_number(require_field(j, "t", path), path + ".t");
    const std::string action = as_string(require_field(j, "action", path), path + ".action");
    const auto& payload = require_field(j, "payload", path);
    const std::string ppath = path + ".payload";

    if (action == "spawn") {
        SpawnSpec spec;
        const auto& comps =
            as_array(require_field(payload, "components", ppath), ppath + ".components");
        bool has_brain = false;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            spec.components.push_back(component_from_json(
                comps[i], ppath + ".components[" + std::to_string(i) + "]", true));
            for (const auto& f : spec.components.back().labels)
                if (f.is_brain()) has_brain = true;
        }
        if (payload.contains("discontinuous")) {
            spec.discontinuous = as_bool(payload["discontinuous"], ppath + ".discontinuous");
        } else if (has_brain) {
            throw parse_error(ppath + ".discontinuous: required for components carrying "
                                      "brain factors (rule 2 decides their status)");
        }
        if (payload.contains("couplings")) {
            const auto& arr = as_array(payload["couplings"], ppath + ".couplings");
            for (std::size_t i = 0; i < arr.size(); ++i)
                spec.couplings.push_back(coupling_from_json(
                    arr[i], ppath + ".couplings[" + std::to_string(i) + "]"));
        }
        ev.action = std::move(spec);
    } else if (action == "end_window") {
        EndWindowSpec spec;
        spec.row = as_int(require_field(payload, "row", ppath), ppath + ".row");
        spec.col = as_int(require_field(payload, "col", ppath), ppath + ".col");
        ev.action = spec;
    } else if (action == "set_incoherent") {
        SetIncoherentSpec spec;
        const auto& arr =
            as_array(require_field(payload, "indices", ppath), ppath + ".indices");
        for (std::size_t i = 0; i < arr.size(); ++i)
            spec.indices.push_back(as_int(arr[i], ppath + ".indices[" + std::to_string(i) + "]"));
        ev.action = spec;
    } else {
        throw parse_error(path + ".action: unknown action '" + action + "'");
    }
    return ev;
}

inline nlohmann::ordered_json event_to_json(const ScenarioEvent& ev) {
    nlohmann::ordered_json j;
    j["t"] = ev.t;
    nlohmann::ordered_json payload;
    if (const auto* spawn = std::get_if<SpawnSpec>(&ev.action)) {
        j["action"] = "spawn";
        payload["components"] = nlohmann::ordered_json::array();
        for (const auto& c : spawn->components)
            payload["components"].push_back(component_to_json(c));
        payload["discontinuous"] = spawn->discontinuous;
        payload["couplings"] = nlohmann::ordered_json::array();
        for (const auto& e : spawn->couplings)
            payload["couplings"].push_back(coupling_to_json(e));
    } else if (const auto* end = std::get_if<EndWindowSpec>(&ev.action)) {
        j["action"] = "end_window";
        payload["row"] = end->row;
        payload["col"] = end->col;
    } else if (const auto* inc = std::get_if<SetIncoherentSpec>(&ev.action)) {
        j["action"] = "set_incoherent";
        payload["indices"] = inc->indices;
    }
    j["payload"] = std::move(payload);
    return j;
}

} // namespace detail

inline nlohmann::ordered_json serialize(const Scenario& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["components"] = nlohmann::ordered_json::array();
    for (const auto& c : s.initial) j["components"].push_back(detail::component_to_json(c));
    j["couplings"] = nlohmann::ordered_json::array();
    for (const auto& e : s.schedule.entries)
        j["couplings"].push_back(detail::coupling_to_json(e));
    j["events"] = nlohmann::ordered_json::array();
    for (const auto& ev : s.events) j["events"].push_back(detail::event_to_json(ev));
    j["duration"] = s.duration;
    if (s.subsystem.empty())
        j["subsystem"] = "all";
    else
        j["subsystem"] = s.subsystem;
    j["rule4_enabled"] = s.rule4_enabled;
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    if (j.contains("name")) s.name = detail::as_string(j["name"], "name");

    const auto& comps = detail::as_array(detail::require_field(j, "components", "document"),
                                         "components");
    for (std::size_t i = 0; i < comps.size(); ++i)
        s.initial.push_back(detail::component_from_json(
            comps[i], "components[" + std::to_string(i) + "]", false));

    if (j.contains("couplings")) {
        const auto& arr = detail::as_array(j["couplings"], "couplings");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "couplings[" + std::to_string(i) + "]";
            const CouplingEntry e = detail::coupling_from_json(arr[i], path);
            try {
                s.schedule.add(e.row, e.col, e.g, e.t_start, e.t_end);
            } catch (const config_error& err) {
                throw parse_error(path + ": " + err.what());
            }
        }
    }

    if (j.contains("events")) {
        const auto& arr = detail::as_array(j["events"], "events");
        for (std::size_t i = 0; i < arr.size(); ++i)
            s.events.push_back(
                detail::event_from_json(arr[i], "events[" + std::to_string(i) + "]"));
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.t < b.t; });
    }

    s.duration = detail::as_number(detail::require_field(j, "duration", "document"),
                                   "duration");

    if (j.contains("subsystem")) {
        const auto& sub = j["subsystem"];
        if (sub.is_string()) {
            if (sub.get<std::string>() != "all")
                throw parse_error("subsystem: expected \"all\" or an index array");
        } else {
            const auto& arr = detail::as_array(sub, "subsystem");
            for (std::size_t i = 0; i < arr.size(); ++i)
                s.subsystem.push_back(
                    detail::as_int(arr[i], "subsystem[" + std::to_string(i) + "]"));
        }
    }

    if (j.contains("rule4_enabled"))
        s.rule4_enabled = detail::as_bool(j["rule4_enabled"], "rule4_enabled");

    s.validate();
    return s;
}

inline Scenario load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(path + ": invalid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

inline void save(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write scenario file: " + path);
    out << serialize(s).dump(2) << '\n';
}

} // namespace readyrules
