// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gridsec/common.hpp"
#include "gridsec/dataset.hpp"

namespace gridsec {

// Piecewise-uniform law for the per-regime stability margin: (lo, hi, mass).
struct SimBand {
  double lo, hi, mass;
};

// Default margin law: deep plateaus on both sides, thin taper bands, and a
// wide zero-straddling corridor so a sizable share of regimes sits near the
// stability boundary.
inline std::vector<SimBand> default_margin_bands() {
  return {{-0.47, -0.29, 0.275}, {-0.29, -0.15, 0.015}, {-0.15, -0.035, 0.050},
          {-0.035, 0.035, 0.320}, {0.035, 0.15, 0.050}, {0.15, 0.29, 0.015},
          {0.29, 0.47, 0.275}};
}

// Synthetic telemetry sampler for the four-node star grid, used when no
// recorded dataset is supplied.  The sequence is organised in 8-row block
// regimes:
//   - a reflected uniform walk drives each regime's stability margin m
//     through the band law above; the stab column is m plus a small jitter,
//     so a block's rows share one regime;
//   - tau1..4 and g1,g3,g4 are family-correlated channels recentred so the
//     family mean tracks c0 + m (margin expressed in the dynamics);
//   - g2 is a quiet channel at pc0 carrying a small offset whose sign equals
//     the block's final-row stability sign; a few percent of rows are
//     replaced by range outliers, and on a fraction p_sup of deep regimes
//     (|m| > sup_deep) the offset is omitted;
//   - p2,p3 wobble antisymmetrically around pc0 (slow, label-free) and p4
//     follows an independent slow walk; p1 balances the consumers exactly.
struct SimulatorConfig {
  int rows = 10000;
  std::uint64_t seed = 7;
  double eta_y = 0.9;     // margin-walk step per block
  double eta_s = 0.02;    // channel-state walk step per row
  double jit = 0.03;      // iid jitter on margin-expressed channels
  double rho = 0.5;       // family-common share of channel state
  double c0 = 0.50;       // family mean at zero margin
  double stab_jit = 0.008;
  double amp = 0.0375;    // signed offset on the quiet channel
  double jit_pc = 0.004;  // jitter on quiet/wobble channels
  double delta = 0.30;    // antisymmetric wobble half-width
  double delta4 = 0.20;   // p4 walk half-width
  double pc0 = 0.40;      // quiet-channel baseline
  double p_out = 0.01;    // per-row outlier probability on the quiet channel
  double p_sup = 0.06;    // offset suppression probability on deep regimes
  double sup_deep = 0.15;
  std::vector<SimBand> bands = default_margin_bands();
};

namespace detail {

inline double reflect01(double v) {
  if (v < 0.0) v = -v;
  if (v > 1.0) v = 2.0 - v;
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

inline double quantile_margin(double y, const std::vector<SimBand>& bands) {
  double acc = 0.0;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const SimBand& b = bands[i];
    if (y <= acc + b.mass || i + 1 == bands.size()) {
      double t = (y - acc) / b.mass;
      t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
      return b.lo + (b.hi - b.lo) * t;
    }
    acc += b.mass;
  }
  return bands.back().hi;
}

}  // namespace detail

inline std::vector<GridRecord> simulate_telemetry(const SimulatorConfig& cfg) {
  if (cfg.rows <= 0 || cfg.rows % 8 != 0)
    throw ConfigError("simulator rows must be a positive multiple of 8");

  constexpr double kTauLo = 0.5, kTauHi = 10.0;
  constexpr double kPLo = -2.0, kPHi = -0.5;
  constexpr double kGLo = 0.05, kGHi = 1.0;

  Rng rng(cfg.seed);            // state walks
  Rng rng_out(cfg.seed + 7001); // outliers + suppression draws
  Rng rng_jit(cfg.seed + 7002); // jitters

  std::array<double, 13> st{};
  for (auto& v : st) v = rng.uniform();
  double y = rng.uniform();

  double m = 0.0, mark = 0.0;
  std::array<double, 8> s_block{};

  std::vector<GridRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.rows));
  for (int i = 0; i < cfg.rows; ++i) {
    if (i % 8 == 0) {
      y = detail::reflect01(y + cfg.eta_y * rng.sym());
      m = detail::quantile_margin(y, cfg.bands);
      for (auto& s : s_block) s = m + cfg.stab_jit * rng_jit.sym();
      mark = cfg.amp * (s_block[7] > 0.0 ? 1.0 : -1.0);
      // Deep regimes stay resolvable from the margin channels alone, so a
      // small share of them omits the offset entirely.
      if (std::abs(m) > cfg.sup_deep && rng_out.uniform() < cfg.p_sup)
        mark = 0.0;
    }

    // Family-correlated states recentred to the regime margin.
    std::array<double, 4> t{};
    for (int k = 0; k < 4; ++k)
      t[k] = cfg.rho * st[0] + (1.0 - cfg.rho) * st[1 + k];
    std::array<double, 3> gm{};
    for (int k = 0; k < 3; ++k)
      gm[k] = cfg.rho * st[5] + (1.0 - cfg.rho) * st[6 + k];
    const double t_mean = (t[0] + t[1] + t[2] + t[3]) / 4.0;
    const double g_mean = (gm[0] + gm[1] + gm[2]) / 3.0;
    for (auto& v : t) v += (cfg.c0 + m) - t_mean;
    for (auto& v : gm) v += (cfg.c0 + m) - g_mean;

    GridRecord rec;
    for (int k = 0; k < 4; ++k)
      rec.tau[k] =
          kTauLo + clamp01(t[k] + cfg.jit * rng_jit.sym()) * (kTauHi - kTauLo);
    rec.stab = s_block[i % 8];
    rec.stabf = rec.stab > 0.0 ? Label::Unstable : Label::Stable;

    double mcol = cfg.pc0 + mark + cfg.jit_pc * rng_jit.sym();
    if (rng_out.uniform() < cfg.p_out) mcol = rng_out.uniform(0.02, 0.98);

    std::array<double, 3> gj{};
    for (int k = 0; k < 3; ++k) gj[k] = gm[k] + cfg.jit * rng_jit.sym();
    rec.g[0] = kGLo + clamp01(gj[0]) * (kGHi - kGLo);
    rec.g[1] = kGLo + clamp01(mcol) * (kGHi - kGLo);
    rec.g[2] = kGLo + clamp01(gj[1]) * (kGHi - kGLo);
    rec.g[3] = kGLo + clamp01(gj[2]) * (kGHi - kGLo);

    const double wob = (st[10] - 0.5) * 2.0 * cfg.delta;
    const double w4 = (st[11] - 0.5) * 2.0 * cfg.delta4;
    std::array<double, 3> pc = {cfg.pc0 + wob, cfg.pc0 - wob, cfg.pc0 + w4};
    double psum = 0.0;
    for (int k = 0; k < 3; ++k) {
      double v = kPLo + clamp01(pc[k] + cfg.jit_pc * rng_jit.sym()) *
                            (kPHi - kPLo);
      rec.p[1 + k] = v;
      psum += v;
    }
    rec.p[0] = -psum;  // producer exactly balances the consumers

    out.push_back(rec);

    for (auto& s : st) s = detail::reflect01(s + cfg.eta_s * rng.sym());
  }
  return out;
}

}  // namespace gridsec
