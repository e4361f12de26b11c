#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <set>
#include <vector>

#include "readyrules/rules.hpp"

using namespace readyrules;
using Catch::Matchers::WithinAbs;

namespace {

// Particle-and-detector pair: component 0 is the undecayed branch, component
// 1 the decayed one the current flows into.
SystemState detector_pair(cplx a0, cplx a1) {
    SystemState st;
    st.components.push_back({a0, {FactorLabel::particle(), FactorLabel::detector(0)}, false, false, 0.0});
    st.components.push_back({a1, {FactorLabel::detector(1)}, false, false, 0.0});
    st.refresh_s();
    return st;
}

HamiltonianSchedule single_coupling(double g) {
    HamiltonianSchedule sched;
    sched.add(0, 1, cplx{g, 0.0}, 0.0, 1e6);
    return sched;
}

Component brain_comp(cplx amp, std::vector<FactorLabel> labels, bool incoherent = false) {
    return Component{amp, std::move(labels), incoherent, false, 0.0};
}

} // namespace

TEST_CASE("hazard equals positive inflow over total square modulus", "[rules]") {
    const double inv = 1.0 / std::sqrt(2.0);

    SECTION("unit total, one receiving component with J = 0.2") {
        auto st = detector_pair(cplx{inv, 0.0}, cplx{0.0, -inv});
        auto sched = single_coupling(0.2);
        auto J = net_currents(st, sched);
        REQUIRE_THAT(J[1], WithinAbs(0.2, 1e-12));
        CHECK_THAT(hazard(st, sched, {0, 1}), WithinAbs(0.2, 1e-12));
        CHECK_THAT(hazard(st, sched, {1}), WithinAbs(0.2, 1e-12));
    }

    SECTION("total square modulus 0.5 with the same currents doubles the rate") {
        auto st = detector_pair(cplx{0.5, 0.0}, cplx{0.0, -0.5});
        auto sched = single_coupling(0.4);
        auto J = net_currents(st, sched);
        REQUIRE_THAT(J[1], WithinAbs(0.2, 1e-12));
        CHECK_THAT(st.s, WithinAbs(0.5, 1e-12));
        CHECK_THAT(hazard(st, sched, {0, 1}), WithinAbs(0.4, 1e-12));
    }

    SECTION("only outflow in the subsystem gives zero hazard") {
        auto st = detector_pair(cplx{inv, 0.0}, cplx{0.0, -inv});
        auto sched = single_coupling(0.2);
        CHECK(hazard(st, sched, {0}) == 0.0);

        // Reversed phase drives the current the other way entirely.
        auto back = detector_pair(cplx{0.0, -inv}, cplx{inv, 0.0});
        CHECK(hazard(back, sched, {1}) == 0.0);
    }

    SECTION("degenerate state rejected") {
        auto st = detector_pair(cplx{0.0, 0.0}, cplx{0.0, 0.0});
        auto sched = single_coupling(0.2);
        CHECK_THROWS_AS(hazard(st, sched, {0, 1}), model_error);
    }

    SECTION("subsystem indices are range checked") {
        auto st = detector_pair(cplx{inv, 0.0}, cplx{0.0, -inv});
        auto sched = single_coupling(0.2);
        CHECK_THROWS_AS(hazard(st, sched, {2}), config_error);
        CHECK_THROWS_AS(hazard(st, sched, {-1}), config_error);
    }
}

TEST_CASE("trigger crosses its threshold exactly once", "[rules]") {
    SECTION("crossing fraction interpolates within the increment") {
        Trigger t;
        t.u = 0.5;
        t.c = 0.0;
        CHECK_FALSE(t.advance(0.2).has_value());
        CHECK_FALSE(t.advance(0.2).has_value());
        auto f = t.advance(0.2);
        REQUIRE(f.has_value());
        CHECK_THAT(*f, WithinAbs(0.5, 1e-12));
        CHECK_THAT(t.c, WithinAbs(0.6, 1e-12));

        // Already past the threshold: no further hits from this trigger.
        CHECK_FALSE(t.advance(0.5).has_value());
    }

    SECTION("threshold at zero fires on the first positive increment") {
        Trigger t;
        t.u = 0.0;
        t.c = 0.0;
        CHECK_FALSE(t.advance(0.0).has_value());
        auto f = t.advance(0.01);
        REQUIRE(f.has_value());
        CHECK(*f == 0.0);
    }

    SECTION("landing exactly on the threshold defers the hit") {
        Trigger t;
        t.u = 0.4;
        t.c = 0.0;
        CHECK_FALSE(t.advance(0.4).has_value());
        auto f = t.advance(0.1);
        REQUIRE(f.has_value());
        CHECK(*f == 0.0);
    }

    SECTION("negative increments rejected") {
        Trigger t;
        CHECK_THROWS_AS(t.advance(-1e-9), config_error);
    }

    SECTION("arming draws a fresh threshold in [0, 1)") {
        std::mt19937_64 rng(7);
        Trigger t;
        for (int i = 0; i < 1000; ++i) {
            t.c = 0.7;
            t.arm(rng);
            CHECK(t.c == 0.0);
            CHECK(t.u >= 0.0);
            CHECK(t.u < 1.0);
        }
    }
}

TEST_CASE("hits land on receiving components in proportion to inflow", "[rules]") {
    // Currents fixed by hand; component 0 only loses square modulus.
    std::vector<double> J{-0.4, 0.3, 0.1};
    std::vector<int> eligible{1, 2};
    SystemState st;
    st.components.resize(3);
    st.s = 1.0;

    SECTION("selection frequencies match the 0.75 / 0.25 split") {
        std::mt19937_64 rng(20240817);
        const int trials = 20000;
        int first = 0;
        for (int i = 0; i < trials; ++i) {
            Trigger t; // u = 1 sentinel, force immediate crossing
            t.u = 0.0;
            t.c = 0.0;
            auto hit = advance_trigger(t, 0.4, 0.01, st, J, eligible, rng);
            REQUIRE(hit.has_value());
            REQUIRE((hit->component == 1 || hit->component == 2));
            if (hit->component == 1) ++first;
        }
        double freq = static_cast<double>(first) / trials;
        double sigma = std::sqrt(0.75 * 0.25 / trials);
        CHECK_THAT(freq, WithinAbs(0.75, 3.0 * sigma));
    }

    SECTION("no crossing leaves the trigger armed") {
        std::mt19937_64 rng(1);
        Trigger t;
        t.u = 0.9;
        t.c = 0.0;
        auto hit = advance_trigger(t, 0.4, 0.01, st, J, eligible, rng);
        CHECK_FALSE(hit.has_value());
        CHECK_THAT(t.c, WithinAbs(0.004, 1e-15));
    }

    SECTION("coarse steps are rejected before accumulating") {
        std::mt19937_64 rng(1);
        Trigger t;
        CHECK_THROWS_AS(advance_trigger(t, 0.4, 0.25, st, J, eligible, rng), config_error);
        CHECK(t.c == 0.0);
    }

    SECTION("a hit with no receiving component is a rule violation") {
        std::mt19937_64 rng(1);
        std::vector<double> drained{0.3, -0.2, -0.1};
        CHECK_THROWS_AS(select_component(drained, eligible /* {1,2} */, rng), rule_error);
        CHECK(select_component(drained, {0}, rng) == 0);
    }
}

TEST_CASE("rule 2 stamps active brain factors in discontinuous components", "[rules]") {
    SystemState st;
    st.components.push_back(brain_comp(cplx{1.0, 0.0}, {FactorLabel::particle()}));
    st.refresh_s();
    st.time = 2.5;

    SECTION("active statuses become ready, inactive ones are untouched") {
        Component spawn = brain_comp(
            cplx{0.0, 0.0},
            {FactorLabel::detector(1),
             FactorLabel::brain(0, 0, BrainStatus::Conscious),
             FactorLabel::brain(1, 1, BrainStatus::Ready),
             FactorLabel::brain(2, 0, BrainStatus::Unconscious),
             FactorLabel::brain(3, 0, BrainStatus::Unknown)});
        auto idx = apply_rule2(st, {spawn}, true);
        REQUIRE(idx == std::vector<int>{1});
        const auto& labels = st.components[1].labels;
        CHECK(labels[1].status == BrainStatus::Ready);
        CHECK(labels[2].status == BrainStatus::Ready);
        CHECK(labels[3].status == BrainStatus::Unconscious);
        CHECK(labels[4].status == BrainStatus::Unknown);
        CHECK(st.components[1].birth_time == 2.5);
        CHECK(st.components[1].modulus() == 0.0);
    }

    SECTION("continuous creation keeps statuses as declared") {
        Component spawn = brain_comp(cplx{0.0, 0.0},
                                     {FactorLabel::brain(0, 0, BrainStatus::Conscious)});
        apply_rule2(st, {spawn}, false);
        CHECK(st.components[1].labels[0].status == BrainStatus::Conscious);
    }

    SECTION("components must be born with amplitude exactly zero") {
        Component spawn = brain_comp(cplx{1e-300, 0.0}, {FactorLabel::detector(0)});
        CHECK_THROWS_AS(apply_rule2(st, {spawn}, true), rule_error);
        CHECK(st.size() == 1);
    }

    SECTION("spawned components are validated") {
        Component spawn = brain_comp(cplx{0.0, 0.0},
                                     {FactorLabel::brain(0, 0, BrainStatus::Ready),
                                      FactorLabel::brain(0, 1, BrainStatus::Ready)});
        CHECK_THROWS_AS(apply_rule2(st, {spawn}, true), config_error);
    }
}

TEST_CASE("rule 3 promotes the hit component and zeroes the rest", "[rules]") {
    SystemState st;
    st.components.push_back(brain_comp(cplx{0.6, 0.0},
                                       {FactorLabel::particle(), FactorLabel::detector(0),
                                        FactorLabel::brain(0, 0, BrainStatus::Conscious)}));
    st.components.push_back(brain_comp(cplx{0.0, -0.8},
                                       {FactorLabel::detector(1),
                                        FactorLabel::brain(0, 1, BrainStatus::Ready)}));
    st.refresh_s();
    st.time = 1.25;

    SECTION("happy path") {
        auto ev = apply_rule3(st, 1);
        CHECK(ev.time == 1.25);
        CHECK(ev.chosen == 1);
        CHECK(ev.rule == ReductionRule::Rule3);
        CHECK(ev.zeroed == std::vector<int>{0});
        CHECK(st.components[1].labels[1].status == BrainStatus::Conscious);
        CHECK(st.components[0].zeroed);
        CHECK(st.components[0].amplitude == cplx{0.0, 0.0});
        CHECK_THAT(st.s, WithinAbs(0.64, 1e-12));
        CHECK(everett_ok(st));
    }

    SECTION("several ready observers in the hit component all wake up") {
        st.components[1].labels.push_back(FactorLabel::brain(1, 1, BrainStatus::Ready));
        apply_rule3(st, 1);
        CHECK(st.components[1].labels[1].status == BrainStatus::Conscious);
        CHECK(st.components[1].labels[2].status == BrainStatus::Conscious);
    }

    SECTION("hit on a component without a ready brain factor") {
        CHECK_THROWS_AS(apply_rule3(st, 0), rule_error);
    }

    SECTION("hit on a zeroed component") {
        apply_rule3(st, 1);
        CHECK_THROWS_AS(apply_rule3(st, 0), rule_error);
    }

    SECTION("index range") {
        CHECK_THROWS_AS(apply_rule3(st, 2), config_error);
        CHECK_THROWS_AS(apply_rule3(st, -1), config_error);
    }
}

TEST_CASE("rule 1a reduces on incoherent components", "[rules]") {
    SystemState st;
    st.components.push_back(brain_comp(cplx{0.6, 0.0},
                                       {FactorLabel::particle(), FactorLabel::detector(0)}, true));
    st.components.push_back(brain_comp(cplx{0.0, -0.8}, {FactorLabel::detector(1)}, true));
    st.components.push_back(brain_comp(cplx{0.0, 0.0}, {FactorLabel::detector(1)}, false));
    st.refresh_s();

    SECTION("plain objective reduction") {
        auto ev = apply_rule1a(st, 1);
        CHECK(ev.rule == ReductionRule::Rule1a);
        CHECK(ev.zeroed == std::vector<int>{0, 2});
        CHECK_THAT(st.s, WithinAbs(0.64, 1e-12));
    }

    SECTION("a ready factor in the chosen component wakes without a second reduction") {
        st.components[1].labels.push_back(FactorLabel::brain(0, 1, BrainStatus::Ready));
        auto ev = apply_rule1a(st, 1);
        CHECK(ev.rule == ReductionRule::Rule3mod);
        CHECK(st.components[1].labels[1].status == BrainStatus::Conscious);
        CHECK(everett_ok(st));
    }

    SECTION("coherent components cannot take an objective hit") {
        CHECK_THROWS_AS(apply_rule1a(st, 2), rule_error);
    }
}

TEST_CASE("rule 4 masks pairs sharing a ready brain state", "[rules]") {
    SECTION("two-observer layout masks exactly the anomalous pair") {
        SystemState st;
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::particle(), FactorLabel::detector(0),
             FactorLabel::brain(0, 0, BrainStatus::Conscious),
             FactorLabel::brain(1, -1, BrainStatus::Unknown)}));
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::detector(1),
             FactorLabel::brain(0, 1, BrainStatus::Ready),
             FactorLabel::brain(1, -1, BrainStatus::Unknown)}));
        st.components.push_back(brain_comp(cplx{0.0, 0.0},
            {FactorLabel::particle(true), FactorLabel::detector(0),
             FactorLabel::brain(0, 0, BrainStatus::Ready),
             FactorLabel::brain(1, 0, BrainStatus::Ready)}));
        st.components.push_back(brain_comp(cplx{0.0, 0.0},
            {FactorLabel::detector(1, true),
             FactorLabel::brain(0, 1, BrainStatus::Ready),
             FactorLabel::brain(1, 1, BrainStatus::Ready)}));
        st.refresh_s();

        auto pairs = rule4_pairs(st);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs.count({1, 3}) == 1);

        // Waking the shared factor in component 1 lifts the mask.
        st.components[1].labels[1].status = BrainStatus::Conscious;
        CHECK(rule4_pairs(st).empty());
    }

    SECTION("sharing only a conscious state does not mask") {
        SystemState st;
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::brain(0, 0, BrainStatus::Conscious)}));
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::brain(0, 0, BrainStatus::Conscious)}));
        st.refresh_s();
        CHECK(rule4_pairs(st).empty());
    }

    SECTION("ready factors for different states or observers do not mask") {
        SystemState st;
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::brain(0, 0, BrainStatus::Ready)}));
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::brain(0, 1, BrainStatus::Ready)}));
        st.components.push_back(brain_comp(cplx{0.5, 0.0},
            {FactorLabel::brain(1, 0, BrainStatus::Ready)}));
        st.refresh_s();
        CHECK(rule4_pairs(st).empty());
    }

    SECTION("the mask feeds through to the schedule and kills the current") {
        SystemState st;
        st.components.push_back(brain_comp(cplx{1.0 / std::sqrt(2.0), 0.0},
            {FactorLabel::brain(0, 1, BrainStatus::Ready)}));
        st.components.push_back(brain_comp(cplx{0.0, -1.0 / std::sqrt(2.0)},
            {FactorLabel::brain(0, 1, BrainStatus::Ready)}));
        st.refresh_s();
        auto sched = single_coupling(0.2);

        apply_rule4_mask(st, sched, true);
        REQUIRE(sched.mask.size() == 1);
        auto J = net_currents(st, sched);
        CHECK(J[0] == 0.0);
        CHECK(J[1] == 0.0);

        apply_rule4_mask(st, sched, false);
        CHECK(sched.mask.empty());
        CHECK_THAT(net_currents(st, sched)[1], WithinAbs(0.2, 1e-12));
    }
}

TEST_CASE("single conscious state per observer is auditable", "[rules]") {
    SystemState st;
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::brain(0, 0, BrainStatus::Conscious)}));
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::brain(0, 1, BrainStatus::Conscious)}));
    st.refresh_s();

    CHECK_FALSE(everett_ok(st));

    SECTION("zero-weight components do not count") {
        st.components[1].amplitude = cplx{0.0, 0.0};
        CHECK(everett_ok(st));
    }

    SECTION("different observers may disagree") {
        st.components[1].labels[0] = FactorLabel::brain(1, 1, BrainStatus::Conscious);
        CHECK(everett_ok(st));
    }
}

TEST_CASE("hit eligibility tracks the running mode", "[rules]") {
    SystemState st;
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::particle(), FactorLabel::detector(0)}, true));
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::detector(1), FactorLabel::brain(0, 1, BrainStatus::Ready)}, false));
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::brain(0, 0, BrainStatus::Conscious)}, false));
    st.components.push_back(brain_comp(cplx{0.5, 0.0},
        {FactorLabel::brain(1, 0, BrainStatus::Ready)}, true));
    st.refresh_s();

    RuleMode standard;
    RuleMode objective{RuleVariant::Objective, true};

    CHECK(eligible_components(st, standard) == std::vector<int>{1, 3});
    CHECK(eligible_components(st, objective) == std::vector<int>{0, 3});

    SECTION("zeroed components drop out") {
        st.components[1].zeroed = true;
        st.components[1].amplitude = cplx{0.0, 0.0};
        CHECK(eligible_components(st, standard) == std::vector<int>{3});
    }

    SECTION("subsystem restriction applies first") {
        std::vector<int> sub{0, 1};
        CHECK(eligible_components(st, standard, &sub) == std::vector<int>{1});
        CHECK(eligible_components(st, objective, &sub) == std::vector<int>{0});
        std::vector<int> bad{0, 9};
        CHECK_THROWS_AS(eligible_components(st, standard, &bad), config_error);
    }
}
