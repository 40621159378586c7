#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace herding
{

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base class for every error raised by the library.
class HerdingError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Two agents closer than the configured singularity epsilon.
class CoincidentAgentsError : public HerdingError
{
public:
  using HerdingError::HerdingError;
};

class PreconditionError : public HerdingError
{
public:
  using HerdingError::HerdingError;
};

class SolverFailure : public HerdingError
{
public:
  using HerdingError::HerdingError;
};

class NoPathError : public HerdingError
{
public:
  using HerdingError::HerdingError;
};

// Carries the offending field so tooling can report it.
class ValidationError : public HerdingError
{
public:
  ValidationError( std::string field, const std::string& what )
      : HerdingError( field + ": " + what ), field_( std::move( field ) )
  {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

// Reference trajectory state at one instant: position, velocity, acceleration.
struct TrajectoryStateSample
{
  Vec2 S   = Vec2::Zero();
  Vec2 dS  = Vec2::Zero();
  Vec2 ddS = Vec2::Zero();
};

inline Vec2 block2( const Vector& v, Eigen::Index agent ) { return v.segment<2>( 2 * agent ); }

} // namespace herding
