#include <catch2/catch_amalgamated.hpp>

#include "lqrflow/lqrflow.hpp"

#include <cmath>
#include <random>

using namespace lqrflow;

namespace {
const double kRoot2 = std::sqrt(2.0);
}

TEST_CASE("certificate constants for the one-dimensional plant") {
    const PlCertificate cert = PlCertificate::compute(PlantModel::one_dim());
    CHECK(cert.a == Catch::Approx(0.25).margin(1e-12));
    CHECK(cert.a_prime == Catch::Approx(kRoot2).margin(1e-12));
    CHECK(cert.a1 == Catch::Approx(0.25).margin(1e-12));
    CHECK(cert.a2 == Catch::Approx(kRoot2).margin(1e-12));
    CHECK(cert.a3 == Catch::Approx(kRoot2).margin(1e-12));
    CHECK(cert.a4 == Catch::Approx(1.0).margin(1e-12));
    CHECK(cert.a5 == Catch::Approx(2.0).margin(1e-12));
    CHECK(cert.a6 == Catch::Approx(4.0).margin(1e-12));
    CHECK(cert.b2 == Catch::Approx(1.0).margin(1e-12));
    CHECK(cert.b3 == Catch::Approx(1.0).margin(1e-12));
    // b1 = ||Y*|| eigmin(Q)/(2 eigmin(R)) + Tr(P*)
    CHECK(cert.b1 == Catch::Approx(kRoot2 / 8.0 + 1.0 + kRoot2).margin(1e-12));
    CHECK_FALSE(cert.eigmin_R_above_one);
}

TEST_CASE("xi1 properties") {
    const PlCertificate cert = PlCertificate::compute(PlantModel::one_dim());
    CHECK(xi1(cert, 0.0) == 0.0);
    CHECK_THROWS_AS(xi1(cert, -1e-3), NegativeArgument);

    // xi1(p) = 2p/(sqrt2 + 4p) on the 1-D plant
    for (double p : {0.1, 1.0, 7.5, 100.0})
        CHECK(xi1(cert, p) == Catch::Approx(2.0 * p / (kRoot2 + 4.0 * p)).margin(1e-12));

    const double p = 2.5 - (1.0 + kRoot2);  // J2(3) - J2(K*)
    const double v = xi1(cert, p);
    CHECK(v == Catch::Approx(2.0 * p / (kRoot2 + 4.0 * p)).margin(1e-12));
    CHECK(v < 0.25);  // dominated by |J2'(3)| = 1/4

    // strictly increasing and saturating below sqrt(a1)/a4
    double prev = 0.0;
    for (double q = 1e-6; q <= 1e12; q *= 10.0) {
        const double cur = xi1(cert, q);
        REQUIRE(cur > prev);
        REQUIRE(cur < std::sqrt(cert.a1) / cert.a4);
        prev = cur;
    }
}

TEST_CASE("xi2 properties") {
    const PlCertificate cert = PlCertificate::compute(PlantModel::one_dim());
    CHECK(xi2(cert, 0.0, 1.0) == 0.0);
    CHECK_THROWS_AS(xi2(cert, -1.0, 1.0), NegativeArgument);
    CHECK_THROWS_AS(xi2(cert, 1.0, 0.0), NegativeArgument);

    for (double v : {0.2, 2.0, 50.0})
        CHECK(xi2(cert, v, 1.0) ==
              Catch::Approx(std::sqrt(v / (2.0 * v + 2.0 * cert.b1))).margin(1e-12));

    // limit is sqrt(b3/2); eta rescales b3 by eta^2
    CHECK(xi2(cert, 1e12, 1.0) ==
          Catch::Approx(std::sqrt(cert.b3 / 2.0)).epsilon(1e-5));
    CHECK(xi2(cert, 3.0, 2.0) == Catch::Approx(2.0 * xi2(cert, 3.0, 1.0)).margin(1e-12));
}

TEST_CASE("alpha4 properties") {
    const PlCertificate cert = PlCertificate::compute(PlantModel::one_dim());
    CHECK(alpha4(cert, 0.0) == 0.0);
    CHECK_THROWS_AS(alpha4(cert, -0.5), NegativeArgument);
    for (double r : {0.3, 2.0, 40.0})
        CHECK(alpha4(cert, r) ==
              Catch::Approx(r * r / (2.0 * kRoot2 + 2.0 * r)).margin(1e-12));

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 100.0);
    for (int trial = 0; trial < 10000; ++trial) {
        double r1 = unif(rng), r2 = unif(rng);
        if (r1 > r2)
            std::swap(r1, r2);
        if (r1 == r2)
            continue;
        REQUIRE(alpha4(cert, r2) > alpha4(cert, r1));
    }
}

TEST_CASE("check_lemma on the one-dimensional plant") {
    const PlantModel plant = PlantModel::one_dim();
    const GainMatrix g3 = plant.gain(Matrix::Constant(1, 1, 3.0));

    SECTION("EigminYK at K=3 is exactly tight") {
        // lhs = Y_K = 1/4; rhs = 1/(2 sqrt2 + 2(3-1-sqrt2)) = 1/4 as well:
        // for this plant 2 a3 + 2|K-K*| = 2K-2 whenever K >= K*.
        const BoundReport rep = check_lemma(plant, g3, LemmaId::EigminYK);
        CHECK(rep.lhs == Catch::Approx(0.25).margin(1e-12));
        CHECK(rep.rhs == Catch::Approx(0.25).margin(1e-12));
        CHECK(lemma_holds(rep));
    }
    SECTION("CJSPL at K=3") {
        const BoundReport rep = check_lemma(plant, g3, LemmaId::CJSPL);
        const double p = 2.5 - (1.0 + kRoot2);
        CHECK(rep.lhs == Catch::Approx(0.25).margin(1e-12));
        CHECK(rep.rhs == Catch::Approx(2.0 * p / (kRoot2 + 4.0 * p)).margin(1e-12));
        CHECK(rep.slack > 0.0);
    }
    SECTION("MK vanishes at the optimum") {
        const BoundReport rep = check_lemma(plant, plant.gain(plant.optimal().K_star), LemmaId::MK);
        CHECK(std::abs(rep.lhs) < 1e-10);
        CHECK(std::abs(rep.rhs) < 1e-10);
        CHECK(std::abs(rep.slack) < 1e-10);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(check_lemma(plant, plant.gain(Matrix::Constant(1, 1, 0.5)), LemmaId::MK),
                        NotStabilizing);
        CHECK_THROWS_AS(check_lemma(plant, g3, LemmaId::DescentStandard), UnknownLemma);
    }
}

TEST_CASE("randomized lemma certification") {
    // moderate batch here; the acceptance binary runs the full-size campaign
    for (std::uint64_t plant_seed : {201u, 202u, 203u}) {
        const PlantModel plant = random_plant(4, 2, plant_seed);
        std::mt19937_64 rng(mix_seed(plant_seed, 1));
        for (double rho : {0.1, 1.0, 10.0}) {
            for (int i = 0; i < 60; ++i) {
                const GainMatrix g = random_stabilizing_gain(plant, rho, rng);
                for (LemmaId id : kAllLemmas) {
                    const BoundReport rep = check_lemma(plant, g, id);
                    INFO(lemma_name(id) << " rho=" << rho << " lhs=" << rep.lhs
                                        << " rhs=" << rep.rhs);
                    REQUIRE(lemma_holds(rep));
                    if (id == LemmaId::NaturalIdentity)
                        REQUIRE(std::abs(rep.slack) <=
                                1e-9 * (1.0 + std::max(std::abs(rep.lhs), std::abs(rep.rhs))));
                }
                // TraceYK two-sidedness, checked directly
                const CostBundle cb = evaluate(plant, g);
                const Matrix dK = g.K - plant.optimal().K_star;
                const double lower = (cb.cost - plant.optimal().P_star.trace()) /
                                     (spectral_norm(plant.R()) * dK.squaredNorm());
                const double upper = cb.cost / eigmin_sym(plant.Q());
                const double tr_y = cb.Y_K.trace();
                REQUIRE(tr_y >= lower - 1e-9 * (1.0 + std::abs(lower)));
                REQUIRE(tr_y <= upper + 1e-9 * (1.0 + std::abs(upper)));
            }
        }
    }
}

TEST_CASE("gradient saturation on the one-dimensional plant") {
    // |J2'(z)| -> 1/2 while xi1 never exceeds sqrt(a1)/a4 = 1/2: no K-infinity
    // lower bound on the gradient norm exists.
    const PlantModel plant = PlantModel::one_dim();
    const PlCertificate cert = PlCertificate::compute(plant);
    const CostBundle cb = evaluate(plant, Matrix::Constant(1, 1, 1e6));
    CHECK(std::abs(cb.grad(0, 0)) == Catch::Approx(0.5).margin(1e-4));
    const double p = cb.cost - plant.optimal().P_star.trace();
    CHECK(xi1(cert, p) <= 0.5);
}
