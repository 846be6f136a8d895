#pragma once

#include <algorithm>

#include "pipeflow/error.hpp"

namespace pipeflow {

/// Symbols of the per-frame editing/inversion cost formulas and the two-stage
/// timing model. Everything is a count or a duration in abstract time units.
struct CostModelParams {
  double T = 50.0;        // diffusion timesteps
  double n = 4096.0;      // tokens per frame
  double d = 320.0;       // token dimension
  double K = 1.0;         // keyframes per segment
  double B = 1.0;         // batch/segment count
  double F = 1.0;         // frames
  double N1 = 1.0;        // stage-1 serial task count
  double N2 = 1.0;        // stage-2 serial task count
  double T1 = 1.0;        // stage-1 per-task duration
  double T2 = 1.0;        // stage-2 per-task duration
  double unit_cost = 1e-9;  // time per n^2*d unit of work
};

inline void validate_cost_params(const CostModelParams& p) {
  const double fields[] = {p.T, p.n, p.d, p.K, p.B, p.F, p.N1, p.N2, p.T1, p.T2, p.unit_cost};
  for (double v : fields)
    if (!(v > 0.0)) throw Error(Errc::BadConfig, "cost model parameters must be > 0");
}

/// Stage-1 cost: unit_cost * T * n^2 * d per frame.
inline double invert_duration(const CostModelParams& p, double frames) {
  if (!(frames > 0.0)) throw Error(Errc::BadConfig, "frame count must be > 0");
  return p.unit_cost * p.T * p.n * p.n * p.d * frames;
}

/// Stage-2 cost: unit_cost * (K * n^2 * d + n^2) per frame, with K the
/// effective guide count (keyframes plus carried border frames).
inline double edit_duration(const CostModelParams& p, double keyframes, double frames) {
  if (!(frames > 0.0)) throw Error(Errc::BadConfig, "frame count must be > 0");
  if (!(keyframes > 0.0)) throw Error(Errc::BadConfig, "keyframe count must be > 0");
  return p.unit_cost * (keyframes * p.n * p.n * p.d + p.n * p.n) * frames;
}

/// The multiplicative serial/async formulas are reported verbatim even though
/// they are dimensionally a product of counts and squared times; the additive
/// sum and the steady-state pipeline bound are the quantities schedules are
/// actually compared against. All four ride together so nothing is silently
/// "corrected".
struct TimePredictions {
  double t_serial_paper = 0.0;   // N1 * N2 * T1 * T2
  double t_async_paper = 0.0;    // t_serial_paper / B
  double t_serial_sum = 0.0;     // N1*T1 + N2*T2
  double pipeline_bound = 0.0;   // T1 + max(N1, N2) * max(T1, T2)
};

inline TimePredictions predict_times(const CostModelParams& p) {
  validate_cost_params(p);
  TimePredictions out;
  out.t_serial_paper = p.N1 * p.N2 * p.T1 * p.T2;
  out.t_async_paper = out.t_serial_paper / p.B;
  out.t_serial_sum = p.N1 * p.T1 + p.N2 * p.T2;
  out.pipeline_bound = p.T1 + std::max(p.N1, p.N2) * std::max(p.T1, p.T2);
  return out;
}

}  // namespace pipeflow
