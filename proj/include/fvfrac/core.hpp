#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fvfrac {

using Index = std::size_t;
using Vector = std::vector<double>;

inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

/// z-component of (b - a) x (c - a); twice the signed area of triangle abc.
constexpr double cross(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (mesh files, CLI arguments).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A structural invariant of a mesh or geometry does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve broke down or failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

}  // namespace fvfrac
