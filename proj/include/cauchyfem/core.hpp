#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cauchyfem {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for structurally invalid meshes (inverted cells, non-manifold edges).
class MeshError : public Error {
public:
  using Error::Error;
};

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

} // namespace cauchyfem
