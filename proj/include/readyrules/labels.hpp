#pragma once

#include <string>

#include "readyrules/errors.hpp"

namespace readyrules {

// Brain factors carry one of four statuses. Conscious and Ready states are
// "active"; an Unknown state stands for a brain that has not yet looked.
enum class BrainStatus { Conscious, Ready, Unconscious, Unknown };

inline const char* to_string(BrainStatus s) {
    switch (s) {
        case BrainStatus::Conscious:   return "conscious";
        case BrainStatus::Ready:       return "ready";
        case BrainStatus::Unconscious: return "unconscious";
        case BrainStatus::Unknown:     return "unknown";
    }
    return "?";
}

inline BrainStatus brain_status_from_string(const std::string& s) {
    if (s == "conscious")   return BrainStatus::Conscious;
    if (s == "ready")       return BrainStatus::Ready;
    if (s == "unconscious") return BrainStatus::Unconscious;
    if (s == "unknown")     return BrainStatus::Unknown;
    throw parse_error("unknown brain status '" + s + "'");
}

// One factor of a component's tensor product label. Particles and detectors
// may carry a prime (the post-observation copy); brain factors identify an
// observer, a brain state id and a status.
struct FactorLabel {
    enum class Kind { Particle, Detector, Brain };

    Kind kind = Kind::Particle;
    bool primed = false;   // particle, detector
    int mode = 0;          // detector: 0 = no capture, 1 = capture
    int observer = 0;      // brain
    int state = 0;         // brain; -1 when status is Unknown
    BrainStatus status = BrainStatus::Unknown;

    static FactorLabel particle(bool primed = false) {
        FactorLabel f;
        f.kind = Kind::Particle;
        f.primed = primed;
        return f;
    }

    static FactorLabel detector(int mode, bool primed = false) {
        if (mode != 0 && mode != 1) throw config_error("detector mode must be 0 or 1");
        FactorLabel f;
        f.kind = Kind::Detector;
        f.mode = mode;
        f.primed = primed;
        return f;
    }

    static FactorLabel brain(int observer, int state, BrainStatus status) {
        FactorLabel f;
        f.kind = Kind::Brain;
        f.observer = observer;
        f.state = (status == BrainStatus::Unknown) ? -1 : state;
        f.status = status;
        return f;
    }

    bool is_brain() const { return kind == Kind::Brain; }
    bool active() const {
        return is_brain() &&
               (status == BrainStatus::Conscious || status == BrainStatus::Ready);
    }

    // Compact text form, e.g. psi' D1 B[0:1]~
    // Status markers: * conscious, ~ ready, - unconscious, ? unknown.
    std::string str() const {
        switch (kind) {
            case Kind::Particle:
                return primed ? "psi'" : "psi";
            case Kind::Detector:
                return std::string("D") + (mode == 0 ? "0" : "1") + (primed ? "'" : "");
            case Kind::Brain: {
                std::string st = (status == BrainStatus::Unknown) ? "X" : std::to_string(state);
                const char* m = "?";
                switch (status) {
                    case BrainStatus::Conscious:   m = "*"; break;
                    case BrainStatus::Ready:       m = "~"; break;
                    case BrainStatus::Unconscious: m = "-"; break;
                    case BrainStatus::Unknown:     m = "?"; break;
                }
                return "B[" + std::to_string(observer) + ":" + st + "]" + m;
            }
        }
        return "?";
    }

    bool operator==(const FactorLabel&) const = default;
};

} // namespace readyrules
