#pragma once

#include <iosfwd>
#include <vector>

#include "herding/types.hpp"

namespace herding
{

struct TrajectoryBounds
{
  double v_max = 0.48; // cap on ||dS||_inf [m/s]
  double a_max = 0.2;  // cap on ||ddS||_inf [m/s^2]

  void validate() const;
};

struct FitOptions
{
  int    samples         = 1000; // dense feasibility samples per segment
  int    bisection_iters = 40;
  int    scan_steps      = 60;
  double margin          = 1e-6; // relative slack kept below the caps
  double smoothing       = 1e-4; // weight of the acceleration energy term
  double speed_fraction  = 1.0;  // velocity the time search aims for, as a fraction of v_max
};

using Coeffs = Eigen::Matrix<double, 8, 1>; // ascending powers of the normalised time

// Degree-7 polynomial per axis in tau = (t - t_c) / T.
struct TrajectorySegment
{
  Coeffs           cx = Coeffs::Zero();
  Coeffs           cy = Coeffs::Zero();
  double           t_c = 0.0;
  double           T   = 1.0;
  TrajectoryBounds bounds;
  bool             braking = false; // produced by the stop-in-place fallback

  double t_end() const { return t_c + T; }

  // Exact evaluation; clamps before t_c and holds (S(t_end), 0, 0) after t_end.
  TrajectoryStateSample eval( double t ) const;
  // Evaluation at normalised time without the terminal hold.
  TrajectoryStateSample eval_tau( double tau ) const;

  // Largest ||dS||_inf and ||ddS||_inf over `samples` uniform points on [t_c, t_end].
  std::pair<double, double> max_derivatives( int samples = 1000 ) const;
};

// Fits a segment to the window points (first point is replaced by the
// boundary position). `terminal` pins zero velocity and acceleration at the
// window end. Throws PreconditionError on an empty window or non-finite data,
// SolverFailure when neither the fit nor the braking fallback meets the caps.
TrajectorySegment fit_segment( const std::vector<Vec2>& window, const TrajectoryStateSample& boundary, double t_c,
                               bool terminal, const TrajectoryBounds& bounds, const FitOptions& options = {} );

// Stop from the boundary state with free end position.
TrajectorySegment braking_segment( const TrajectoryStateSample& boundary, double t_c, const TrajectoryBounds& bounds,
                                   const FitOptions& options = {} );

// Uniform samples of (t, x, y, vx, vy, ax, ay).
void write_segment_csv( std::ostream& os, const TrajectorySegment& seg, int samples = 1000, bool header = true );

} // namespace herding
