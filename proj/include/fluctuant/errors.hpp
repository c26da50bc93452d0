#pragma once

#include <stdexcept>
#include <string>

namespace fluctuant {

// Base for every condition this library raises deliberately. Catch sites that
// want to distinguish "bad input" from "internal bug" should catch this type;
// anything else escaping the library is a defect.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Model construction rejected because a swap rate falls outside [eps0, 1/eps0].
class EllipticityViolated : public Error {
 public:
  using Error::Error;
};

// Symmetric rate table fails the detailed-balance symmetry r(sigma_x eta) = r(eta).
class ReversibilityViolated : public Error {
 public:
  using Error::Error;
};

// Mean-zero jump kernel has a nonzero first moment.
class MeanNotZero : public Error {
 public:
  using Error::Error;
};

// Jump kernel support does not generate Z (gcd of displacements != 1).
class NotIrreducible : public Error {
 public:
  using Error::Error;
};

// Weak-asymmetry strength |a_n| exceeds 1, which would make a rate negative.
class AsymmetryOutOfRange : public Error {
 public:
  using Error::Error;
};

// Spectral-gap request on a sector with a single configuration.
class DisconnectedSector : public Error {
 public:
  using Error::Error;
};

// H^{-1} solve requires a mean-zero right-hand side on the sector.
class NotMeanZero : public Error {
 public:
  using Error::Error;
};

// Normal-equations matrix for the variational coefficient is numerically singular.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

// Block-estimate inputs must have pairwise disjoint dependency windows.
class OverlappingSupports : public Error {
 public:
  using Error::Error;
};

// Log-log fit received a non-positive value.
class NonPositive : public Error {
 public:
  using Error::Error;
};

// Configuration file failed to parse or failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fluctuant
