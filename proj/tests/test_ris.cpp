#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <numbers>
#include <numeric>

#include "pwe/ris.hpp"

using namespace pwe;

namespace {

RisPanel square(int n) { return RisPanel(1, {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, n, n); }

// Brute-force array factor from the element list, written independently of
// the library's separable loop.
double af_oracle(const RisPanel& panel, const PhaseProfile& prof, Vec3 inc, Vec3 out) {
  std::complex<double> sum = 0.0;
  std::size_t idx = 0;
  for (int r = 0; r < panel.rows(); ++r) {
    for (int c = 0; c < panel.cols(); ++c, ++idx) {
      const double xu = (c - (panel.cols() - 1) / 2.0) * panel.spacing();
      const double xv = (r - (panel.rows() - 1) / 2.0) * panel.spacing();
      const Vec3 pos = panel.u_axis() * xu + panel.v_axis() * xv;
      sum += std::polar(1.0, prof.phases[idx] + 2 * std::numbers::pi * dot(inc + out, pos));
    }
  }
  const double m = panel.element_count();
  return std::norm(sum) / (m * m);
}

// Half-power beamwidth of an N-element uniform line array with pitch s
// (wavelengths), broadside, by bisection on the closed-form array factor.
double hpbw_oracle_deg(int n, double s) {
  auto f = [&](double th) {
    const double x = std::numbers::pi * s * std::sin(th);
    if (std::abs(x) < 1e-15) return 1.0;
    const double v = std::sin(n * x) / (n * std::sin(x));
    return v * v;
  };
  double lo = 0.0;
  double hi = std::asin(std::min(1.0, 1.0 / (n * s)));
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.5 ? lo : hi) = mid;
  }
  return 2.0 * rad_to_deg(0.5 * (lo + hi));
}

}  // namespace

TEST(SteerProfile, BroadsideIsUniform) {
  const RisPanel p = square(10);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  for (double ph : prof.phases) EXPECT_NEAR(std::cos(ph - prof.phases[0]), 1.0, 1e-12);
}

TEST(SteerProfile, MatchesClosedForm) {
  const RisPanel p(3, {1, 2, 3}, normalized({1, 1, 0.2}), {0, 0, 1}, 4, 7, 0.4);
  const Vec3 inc = normalized(Vec3{1, -0.3, 0.5});
  const Vec3 tgt = normalized(Vec3{0.6, 1, -0.4});
  const auto prof = steer_profile(p, inc, tgt);
  std::size_t idx = 0;
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < p.cols(); ++c, ++idx) {
      const Vec3 pos = p.u_axis() * ((c - 3.0) * 0.4) + p.v_axis() * ((r - 1.5) * 0.4);
      const double expect = -2 * std::numbers::pi * (dot(inc, pos) + dot(tgt, pos));
      EXPECT_NEAR(std::remainder(prof.phases[idx] - expect, 2 * std::numbers::pi), 0.0, 1e-12);
      EXPECT_GE(prof.phases[idx], 0.0);
      EXPECT_LT(prof.phases[idx], 2 * std::numbers::pi);
    }
  }
}

TEST(SteerProfile, TargetBehindPanel) {
  const RisPanel p = square(4);
  try {
    steer_profile(p, p.normal(), {0, 0, -1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfCoverage);
  }
}

TEST(ArrayFactor, MatchesBruteForceOracle) {
  Rng rng(21);
  const RisPanel p(2, {0, 0, 0}, normalized({0.2, -1, 0.1}), {0, 0, 1}, 6, 9, 0.5);
  for (int i = 0; i < 50; ++i) {
    const auto prof = diffusion_profile(p, 100 + i);
    const Vec3 inc = normalized({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Vec3 out = normalized({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    EXPECT_NEAR(array_factor_power(p, prof, inc, out), af_oracle(p, prof, inc, out), 1e-12);
  }
}

TEST(ScatteringDiagram, PeakIsOneAtSteeredAngle) {
  const RisPanel p = square(10);
  const Vec3 tgt = p.direction(deg_to_rad(25.0), 0.0);
  const auto prof = steer_profile(p, p.normal(), tgt);
  const auto cut = cut_through(p, tgt);
  const double steer = cut_angle_deg(p, cut, tgt);
  EXPECT_NEAR(steer, 25.0, 1e-9);
  const auto d = scattering_diagram(p, prof, p.normal(), cut, 0.01, steer);
  EXPECT_NEAR(*std::max_element(d.values.begin(), d.values.end()), 1.0, 1e-15);
  const auto it = std::find_if(d.angles_deg.begin(), d.angles_deg.end(), [](double a) { return std::abs(a - 25.0) < 1e-9; });
  ASSERT_NE(it, d.angles_deg.end());
  EXPECT_NEAR(d.values[static_cast<std::size_t>(it - d.angles_deg.begin())], 1.0, 1e-12);
  EXPECT_NEAR(d.peak_power, 1.0, 1e-12);
}

TEST(ScatteringDiagram, FirstNullOfTenByTen) {
  const RisPanel p = square(10);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const double null_deg = rad_to_deg(std::asin(0.2));
  EXPECT_NEAR(null_deg, 11.54, 0.005);
  const auto cut = cut_through(p, p.normal());
  EXPECT_LT(array_factor_power(p, prof, p.normal(), cut_direction(p, cut, deg_to_rad(null_deg))), 1e-20);
  EXPECT_LT(af_oracle(p, prof, p.normal(), cut_direction(p, cut, deg_to_rad(null_deg))), 1e-20);
  const auto d = scattering_diagram(p, prof, p.normal(), cut, 0.01);
  // Grid minimum of the first sidelobe gap sits next to the analytic null.
  std::size_t best = 0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (d.angles_deg[i] > 5 && d.angles_deg[i] < 15 && (best == 0 || d.values[i] < d.values[best])) best = i;
  }
  EXPECT_NEAR(d.angles_deg[best], null_deg, 0.01);
}

TEST(ScatteringDiagram, SingleElementIsFlat) {
  const RisPanel p = square(1);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const auto d = scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 0.5);
  for (double v : d.values) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(ScatteringDiagram, GlobalPhaseInvariance) {
  const RisPanel p = square(8);
  const Vec3 tgt = p.direction(0.3, -0.2);
  auto prof = steer_profile(p, p.normal(), tgt);
  const auto cut = cut_through(p, tgt);
  const auto a = scattering_diagram(p, prof, p.normal(), cut, 0.1);
  for (auto& ph : prof.phases) ph = wrap_phase(ph + 1.2345);
  const auto b = scattering_diagram(p, prof, p.normal(), cut, 0.1);
  ASSERT_EQ(a.values.size(), b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(Hpbw, TenByTenBroadside) {
  const RisPanel p = square(10);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const double w = hpbw(scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 0.01));
  EXPECT_NEAR(w, 10.2, 0.2);
  EXPECT_NEAR(w, hpbw_oracle_deg(10, 0.5), 0.01);
}

TEST(Hpbw, FortyByFortyBroadside) {
  const RisPanel p = square(40);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const double w = hpbw(scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 0.01, 0.0, 10.0));
  EXPECT_NEAR(w, 2.54, 0.05);
  EXPECT_NEAR(w, hpbw_oracle_deg(40, 0.5), 0.01);
}

TEST(Hpbw, FiveByTenAlongShortAxis) {
  const RisPanel p(1, {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 5, 10);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const double rows_cut = hpbw(scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal(), CutAxis::Rows), 0.01));
  const double cols_cut = hpbw(scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal(), CutAxis::Cols), 0.01));
  EXPECT_NEAR(rows_cut, hpbw_oracle_deg(5, 0.5), 0.01);
  EXPECT_NEAR(rows_cut, 20.8, 0.3);
  EXPECT_NEAR(cols_cut, hpbw_oracle_deg(10, 0.5), 0.01);
  EXPECT_NEAR(panel_hpbw_deg(p), cols_cut, 0.011);
}

TEST(Hpbw, StrictlyDecreasingWithSize) {
  double prev = 1e9;
  for (int n : {5, 10, 20, 40}) {
    const double w = panel_hpbw_deg(square(n));
    EXPECT_LT(w, prev) << n;
    prev = w;
  }
}

TEST(Hpbw, DegenerateAndNarrowDiagrams) {
  ScatteringDiagram flat;
  flat.angles_deg = {-1, 0, 1};
  flat.values = {1, 1, 1};
  try {
    hpbw(flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDiagram);
  }
  const RisPanel p = square(10);
  const auto prof = steer_profile(p, p.normal(), p.normal());
  const auto narrow = scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 0.01, 0.0, 3.0);
  try {
    hpbw(narrow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DiagramTooNarrowlySampled);
  }
}

TEST(ToleratedError, Values) {
  EXPECT_NEAR(tolerated_error(10.0, 5.0), 0.4374, 5e-5);
  EXPECT_NEAR(tolerated_error(18.0, 14.0), 2.217, 5e-4);
  EXPECT_EQ(tolerated_error(10.0, 0.0), 0.0);
  EXPECT_THROW(tolerated_error(0.0, 1.0), Error);
  EXPECT_THROW(tolerated_error(180.0, 1.0), Error);
  try {
    tolerated_error(-5.0, 1.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidAngle);
  }
}

TEST(ToleratedError, MonotoneAndLinear) {
  for (double th = 1; th < 170; th += 7.3) {
    EXPECT_LT(tolerated_error(th, 3.0), tolerated_error(th + 1.0, 3.0));
    for (double d = 0.5; d < 14; d += 1.1) {
      EXPECT_LT(tolerated_error(th, d), tolerated_error(th, d + 0.1));
      EXPECT_NEAR(tolerated_error(th, 2 * d), 2 * tolerated_error(th, d), 1e-12 * tolerated_error(th, 2 * d));
    }
  }
}

TEST(Codebook, Counting) {
  const RisPanel p = square(10);
  CodebookGrid g;
  g.az_min_deg = -60;
  g.az_max_deg = 60;
  g.az_step_deg = 5;
  g.el_min_deg = g.el_max_deg = 0;
  const auto cb = codebook_build(p, p.normal(), g);
  EXPECT_EQ(cb.beamsteer_count(), 25u);
  EXPECT_EQ(cb.size(), 26u);
  EXPECT_EQ(cb.entries().back().functionality, Functionality::Diffusion);

  CodebookGrid one{10, 10, 5, -5, -5, 5};
  EXPECT_EQ(codebook_build(p, p.normal(), one).size(), 2u);

  CodebookGrid empty{10, 5, 5, 0, 0, 5};
  try {
    codebook_build(p, p.normal(), empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCodebook);
  }
}

TEST(Codebook, EveryEntryPeaksAtItsDirection) {
  const RisPanel p = square(10);
  const Vec3 inc = normalized({0.3, -0.4, 1});
  CodebookGrid g{-60, 60, 5, 0, 0, 5};
  const auto cb = codebook_build(p, inc, g);
  const double res = 0.05;
  for (const auto& e : cb.entries()) {
    if (e.functionality != Functionality::Beamsteer) continue;
    const auto cut = cut_through(p, e.direction, CutAxis::Cols);
    const double nominal = cut_angle_deg(p, cut, e.direction);
    const auto d = scattering_diagram(p, e.profile, inc, cut, res, nominal, 90.0);
    const auto peak = std::max_element(d.values.begin(), d.values.end()) - d.values.begin();
    EXPECT_LE(std::abs(d.angles_deg[static_cast<std::size_t>(peak)] - nominal), res + 1e-9);
  }
}

TEST(CodebookSelect, ExactTieAndBehind) {
  const RisPanel p = square(10);
  CodebookGrid g{-60, 60, 5, 0, 0, 5};
  const auto cb = codebook_build(p, p.normal(), g);
  // Exactly along azimuth 20 deg (index 16).
  const Vec3 on = p.center() + p.direction(deg_to_rad(20.0), 0.0) * 3.0;
  EXPECT_EQ(codebook_select(cb, on, p, Functionality::Beamsteer), 16u);
  // Halfway between 20 and 25 deg.
  const Vec3 mid = p.center() + p.direction(deg_to_rad(22.5), 0.0) * 3.0;
  EXPECT_EQ(codebook_select(cb, mid, p, Functionality::Beamsteer), 16u);
  EXPECT_EQ(codebook_select(cb, on, p, Functionality::Diffusion), 25u);
  try {
    codebook_select(cb, {0, 0, -2}, p, Functionality::Beamsteer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfCoverage);
  }
}

TEST(CodebookSelect, PermutationInvariantUpToTieBreak) {
  const RisPanel p = square(6);
  CodebookGrid g{-40, 40, 10, -20, 20, 10};
  const auto cb = codebook_build(p, p.normal(), g);
  std::vector<CodebookEntry> shuffled = cb.entries();
  Rng rng(4);
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng.uniform() * (i + 1)) % (i + 1)]);
  }
  const Codebook permuted(shuffled);
  for (int t = 0; t < 300; ++t) {
    const Vec3 pt = p.center() + p.direction(rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5)) * 2.0;
    const auto& a = cb.at(codebook_select(cb, pt, p, Functionality::Beamsteer));
    const auto& b = permuted.at(codebook_select(permuted, pt, p, Functionality::Beamsteer));
    EXPECT_EQ(a.direction, b.direction);
  }
}

TEST(BeamGainAt, OnRayHalfPowerAndBehind) {
  const RisPanel p = square(20);
  const Vec3 tgt = p.direction(deg_to_rad(15.0), deg_to_rad(-10.0));
  const auto prof = steer_profile(p, p.normal(), tgt);
  EXPECT_NEAR(beam_gain_at(p, prof, p.normal(), p.center() + tgt * 4.0), 1.0, 1e-12);

  const RisPanel sq = square(20);
  const auto broad = steer_profile(sq, sq.normal(), sq.normal());
  const double half = 0.5 * panel_hpbw_deg(sq);
  const Vec3 off = sq.direction(deg_to_rad(half), 0.0);
  EXPECT_NEAR(beam_gain_at(sq, broad, sq.normal(), off * 5.0), 0.5, 0.02);
  EXPECT_EQ(beam_gain_at(sq, broad, sq.normal(), {0.3, 0.1, -2}), 0.0);
}

TEST(DiffusionProfile, DeterministicAndIncoherent) {
  const RisPanel p = square(40);
  EXPECT_EQ(diffusion_profile(p, 5), diffusion_profile(p, 5));
  EXPECT_NE(diffusion_profile(p, 5), diffusion_profile(p, 6));
  const auto prof = diffusion_profile(p, 5);
  for (double ph : prof.phases) {
    EXPECT_GE(ph, 0.0);
    EXPECT_LT(ph, 2 * std::numbers::pi);
  }
  // A steered beam reaches raw power 1; the diffused profile stays far below.
  const double peak = profile_peak_power(p, prof, p.normal(), 1.0);
  EXPECT_LE(peak, 0.1);
  const auto d = scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 0.05, 0.0, 90.0);
  EXPECT_LE(d.peak_power, 0.1);
}

TEST(DiffusionProfile, SingleElementFlat) {
  const RisPanel p = square(1);
  const auto prof = diffusion_profile(p, 1);
  ASSERT_EQ(prof.phases.size(), 1u);
  const auto d = scattering_diagram(p, prof, p.normal(), cut_through(p, p.normal()), 1.0);
  for (double v : d.values) EXPECT_NEAR(v, 1.0, 1e-15);
}
