#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "readyrules/errors.hpp"

namespace readyrules {

// Gaussian resolution profile over the observable eigenvalue axis. The
// width sets how far apart two eigenvalues must be before a reduction can
// tell them apart.
struct ResolutionKernel {
    double width = 0.1;

    ResolutionKernel() = default;
    explicit ResolutionKernel(double w) : width(w) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw config_error("kernel width must be positive and finite");
    }

    double operator()(double delta) const {
        const double z = delta / width;
        return std::exp(-0.5 * z * z);
    }

    // Integral of the bell over [a, b]. The overall constant cancels in
    // every use, so the error function form is left unscaled.
    double mass(double a, double b, double center) const {
        const double inv = 1.0 / (width * std::sqrt(2.0));
        return 0.5 * (std::erf((b - center) * inv) - std::erf((a - center) * inv));
    }
};

// Square-modulus density over the pulse coordinate r in [0, 1]. Higher r
// means lesser pain; drift moves weight upward.
struct ConsciousPulse {
    std::vector<double> weights;
    double bin_width = 0.0;

    int bins() const { return static_cast<int>(weights.size()); }
    double center(int i) const { return (i + 0.5) * bin_width; }

    double total() const {
        double t = 0.0;
        for (double w : weights) t += w;
        return t;
    }

    double mean_r() const {
        double t = 0.0, m = 0.0;
        for (int i = 0; i < bins(); ++i) {
            t += weights[i];
            m += weights[i] * center(i);
        }
        if (!(t > 0.0)) throw model_error("mean position of an empty pulse is undefined");
        return m / t;
    }
};

inline ConsciousPulse make_pulse(int bins) {
    if (bins < 1) throw config_error("a pulse needs at least one bin");
    ConsciousPulse p;
    p.weights.assign(bins, 0.0);
    p.bin_width = 1.0 / bins;
    return p;
}

// Rule 3a. The chosen eigen-weight dissolves into a pulse shaped by the
// kernel around r0, truncated and renormalized to the [0, 1] support so
// the total equals the input weight regardless of where the center sits.
inline ConsciousPulse dissolve(double weight, const ResolutionKernel& kernel, double r0,
                               int bins) {
    if (!(weight > 0.0)) throw config_error("dissolve requires a positive weight");
    if (!(r0 >= 0.0 && r0 <= 1.0))
        throw config_error("pulse center must lie in [0, 1]");
    ConsciousPulse p = make_pulse(bins);
    if (kernel.width < p.bin_width / 2.0)
        throw model_error("kernel width " + std::to_string(kernel.width) +
                          " is below half a bin; the grid cannot carry the pulse");
    const double support = kernel.mass(0.0, 1.0, r0);
    if (!(support > 0.0))
        throw model_error("kernel mass vanishes on the pulse support");
    for (int i = 0; i < bins; ++i) {
        const double lo = static_cast<double>(i) / bins;
        const double hi = static_cast<double>(i + 1) / bins;
        p.weights[i] = weight * kernel.mass(lo, hi, r0) / support;
    }
    return p;
}

// Resolution-limited reduction on a pair of weights: the chosen one is
// kept, the other is attenuated by the kernel at the eigenvalue gap. A gap
// inside the resolution width leaves a genuine superposition behind.
inline std::pair<double, double> partial_reduction(std::pair<double, double> weights,
                                                   double delta_e,
                                                   const ResolutionKernel& kernel,
                                                   int chosen) {
    if (weights.first < 0.0 || weights.second < 0.0)
        throw config_error("weights must be nonnegative");
    if (chosen != 1 && chosen != 2)
        throw config_error("chosen index must be 1 or 2");
    const double k = kernel(delta_e);
    if (chosen == 1)
        weights.second *= k;
    else
        weights.first *= k;
    return weights;
}

// Rule 5. Each bin hands the fraction eta of its weight to its lesser-pain
// neighbor; the top bin only receives. The sweep runs from the top down so
// every transfer reads the pre-step source weight.
inline ConsciousPulse drift_step(const ConsciousPulse& pulse, double eta) {
    if (!(eta >= 0.0 && eta <= 0.5))
        throw config_error("drift rate must lie in [0, 0.5]");
    ConsciousPulse out = pulse;
    for (int i = out.bins() - 2; i >= 0; --i) {
        const double moved = eta * out.weights[i];
        out.weights[i + 1] += moved;
        out.weights[i] -= moved;
    }
    return out;
}

// PET ratio experiment. Four scans: (a) labeled agonist and (b) labeled
// antagonist at pharmacological doses, (c) and (d) the same pair at
// subpharmacological doses where no drift occurs. Receptor occupancy is
// proportional to dose; an active drift boosts the measured agonist
// occupancy by 1 + beta times the pulse displacement.
enum class PetSpecies { Agonist, Antagonist };

struct PetScan {
    double agonist_dose = 0.0;
    double antagonist_dose = 0.0;
    PetSpecies labeled = PetSpecies::Agonist;
    bool pharmacological = false;
    double drift_rate = 0.0;
};

struct PetRatios {
    double r_ab = 0.0;
    double r_cd = 0.0;
    double delta_mean_r = 0.0;
};

struct PetModel {
    double beta = 0.5;          // agonist boost per unit of pulse displacement
    double binding = 1.0;       // occupancy per unit dose
    double capacity = 1.0;      // receptor pool the occupancies must stay under
    int bins = 20;
    double kernel_width = 0.1;
    double start_center = 0.25;
    int drift_steps = 100;

    PetRatios ratios(const PetScan& a, const PetScan& b, const PetScan& c,
                     const PetScan& d) const {
        if (!(beta > 0.0)) throw config_error("pet: beta must be positive");
        if (!(binding > 0.0)) throw config_error("pet: binding must be positive");
        if (!(capacity > 0.0)) throw config_error("pet: capacity must be positive");
        if (drift_steps < 1) throw config_error("pet: drift_steps must be at least 1");

        check_scan(a, "a", PetSpecies::Agonist, true);
        check_scan(b, "b", PetSpecies::Antagonist, true);
        check_scan(c, "c", PetSpecies::Agonist, false);
        check_scan(d, "d", PetSpecies::Antagonist, false);
        if (a.agonist_dose != b.agonist_dose || a.antagonist_dose != b.antagonist_dose)
            throw config_error("pet: scans a and b must share the same doses");
        if (c.agonist_dose != d.agonist_dose || c.antagonist_dose != d.antagonist_dose)
            throw config_error("pet: scans c and d must share the same doses");
        if (a.drift_rate != b.drift_rate)
            throw config_error("pet: scans a and b must share the same drift rate");
        const double ratio_p = a.agonist_dose / a.antagonist_dose;
        const double ratio_s = c.agonist_dose / c.antagonist_dose;
        if (std::abs(ratio_p - ratio_s) > 1e-12 * std::max(ratio_p, ratio_s))
            throw config_error("pet: the agonist to antagonist dose ratio must match "
                               "between the pharmacological and subpharmacological "
                               "conditions");

        const double occ_ag_p = occupy(a.agonist_dose, "a agonist");
        const double occ_ant_p = occupy(a.antagonist_dose, "b antagonist");
        const double occ_ag_s = occupy(c.agonist_dose, "c agonist");
        const double occ_ant_s = occupy(c.antagonist_dose, "d antagonist");

        PetRatios out;
        if (a.drift_rate > 0.0) {
            ConsciousPulse pulse = dissolve(1.0, ResolutionKernel{kernel_width},
                                            start_center, bins);
            const double before = pulse.mean_r();
            for (int s = 0; s < drift_steps; ++s) pulse = drift_step(pulse, a.drift_rate);
            out.delta_mean_r = pulse.mean_r() - before;
        }
        const double boost = 1.0 + beta * out.delta_mean_r;
        const double boosted = occ_ag_p * boost;
        if (boosted > capacity)
            throw model_error("pet: drifted agonist occupancy " + std::to_string(boosted) +
                              " saturates the receptor pool");
        out.r_ab = boosted / occ_ant_p;
        out.r_cd = occ_ag_s / occ_ant_s;
        return out;
    }

private:
    static void check_scan(const PetScan& s, const char* name, PetSpecies labeled,
                           bool pharmacological) {
        const std::string where = std::string("pet: scan ") + name;
        if (!(s.agonist_dose > 0.0) || !(s.antagonist_dose > 0.0))
            throw config_error(where + ": doses must be positive");
        if (s.labeled != labeled)
            throw config_error(where + ": wrong labeled species for this scan");
        if (s.pharmacological != pharmacological)
            throw config_error(where + ": wrong dose regime for this scan");
        if (!(s.drift_rate >= 0.0 && s.drift_rate <= 0.5))
            throw config_error(where + ": drift rate must lie in [0, 0.5]");
        if (!pharmacological && s.drift_rate != 0.0)
            throw config_error(where + ": subpharmacological doses cannot drive drift");
    }

    double occupy(double dose, const char* what) const {
        const double occ = binding * dose;
        if (occ > capacity)
            throw model_error(std::string("pet: ") + what + " occupancy " +
                              std::to_string(occ) + " saturates the receptor pool");
        return occ;
    }
};

} // namespace readyrules
