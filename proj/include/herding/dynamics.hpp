#pragma once

#include <vector>

#include "herding/types.hpp"

namespace herding
{

struct FlockParams
{
  double k_s   = 0.3;  // sheep attraction/repulsion gain [1/s]
  double k_d   = 0.15; // dog repulsion gain [m^3/s]
  double R_s   = 0.5;  // desired inter-sheep distance [m]
  double v_bar = 0.4;  // max sheep speed per axis [m/s]
  double u_bar = 0.4;  // max dog speed per axis [m/s]
  int    n     = 1;
  int    m     = 1;
  // pairwise distances below this raise CoincidentAgentsError
  double singular_eps = 1e-9;

  // Throws ValidationError naming the first offending field.
  void validate() const;
};

struct WorldState
{
  Vector sheep_pos; // 2n, stacked (x, y)
  Vector dog_pos;   // 2m
  double t = 0.0;

  int n_sheep() const { return static_cast<int>( sheep_pos.size() / 2 ); }
  int n_dogs() const { return static_cast<int>( dog_pos.size() / 2 ); }
  Vec2 sheep( int i ) const { return block2( sheep_pos, i ); }
  Vec2 dog( int j ) const { return block2( dog_pos, j ); }
};

// Everything the controller needs about the flock at one instant.
struct SheepDerivatives
{
  int n = 0;
  int m = 0;
  Vector velocity;     // 2n, saturated f_i
  Vector unsaturated;  // 2n, velocity before tanh
  std::vector<Mat2> jac_sheep; // n*n blocks, (i,k) at i*n+k; diagonal blocks hold d f_i / d x_si
  std::vector<Mat2> jac_dog;   // n*m blocks, (i,j) at i*m+j

  const Mat2& wrt_sheep( int i, int k ) const { return jac_sheep[static_cast<size_t>( i * n + k )]; }
  const Mat2& wrt_dog( int i, int j ) const { return jac_dog[static_cast<size_t>( i * m + j )]; }
  Vec2 sheep_velocity( int i ) const { return block2( velocity, i ); }
};

Vec2 sheep_unsaturated_velocity( const WorldState& world, const FlockParams& params, int i );

Vec2 sheep_velocity( const WorldState& world, const FlockParams& params, int i );

// All sheep velocities stacked (2n).
Vector flock_velocity( const WorldState& world, const FlockParams& params );

// d f_i / d x_{s_k}; i != k.
Mat2 sheep_jacobian_wrt_sheep( const WorldState& world, const FlockParams& params, int i, int k );

// d f_i / d x_{d_j}.
Mat2 sheep_jacobian_wrt_dog( const WorldState& world, const FlockParams& params, int i, int j );

Vec2 sheep_acceleration( const WorldState& world, const FlockParams& params, const Vector& sheep_vels,
                         const Vector& dog_vels, int i );

SheepDerivatives compute_derivatives( const WorldState& world, const FlockParams& params );

} // namespace herding
