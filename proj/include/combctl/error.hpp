#pragma once

#include <stdexcept>
#include <string>

namespace combctl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller handed in a value outside the documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Requested vibrational index is not a bound level of the potential.
class UnboundLevel : public Error {
 public:
  using Error::Error;
};

/// The radial grid does not hold a wavefunction to the required accuracy.
class GridTruncation : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a grid (radial or detuning) do not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A pulse design cannot be built from the supplied spectra.
class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

/// A time-domain synthesis would alias or truncate the pulse.
class Aliasing : public Error {
 public:
  using Error::Error;
};

/// A requested excitation fraction exceeds what the pulse can deliver.
class Unachievable : public Error {
 public:
  using Error::Error;
};

/// Non-finite numbers appeared during propagation.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// A surface holds norm outside its bound eigenbasis.
class ContinuumLeakage : public Error {
 public:
  using Error::Error;
};

/// Configuration file problems; the message always names the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace combctl
