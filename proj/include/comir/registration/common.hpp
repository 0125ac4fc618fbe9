#pragma once

// Shared registration vocabulary. Every estimated transform maps reference
// coordinates to floating-image coordinates, so a perfect estimate T gives
// ref(p) == flt(T(p)).

#include "comir/image.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class RegistrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { mi, intensity, feature };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct RegistrationResult {
  RigidTransform2D transform;
  Method method = Method::mi;
  bool success = true;             // false: the method produced no transform
  std::string message;             // failure diagnostic
  double objective = 0.0;          // MI (higher is better) or distance (lower is better)
  std::vector<double> trace;       // objective after each iteration
  double runtime_seconds = 0.0;
  bool converged = false;
  int iterations = 0;

  /// Lower-is-better view of the objective, comparable across starts of one method.
  double cost() const { return method == Method::mi ? -objective : objective; }
};

/// Reduces a multichannel image to one channel (first principal component).
Image to_single_channel(const Image& img);

}  // namespace comir
