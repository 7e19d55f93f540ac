// Copyright 2026 The qtransfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRANSFER_TYPES_H
#define QTRANSFER_TYPES_H

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qtransfer {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Unit helpers. Internally every frequency is angular (rad/s) and every time is in seconds.
inline constexpr double ghz(double f) { return kTwoPi * f * 1e9; }
inline constexpr double mhz(double f) { return kTwoPi * f * 1e6; }
inline constexpr double khz(double f) { return kTwoPi * f * 1e3; }
inline constexpr double us(double t) { return t * 1e-6; }
inline constexpr double ns(double t) { return t * 1e-9; }
inline constexpr double to_mhz(double w) { return w / kTwoPi / 1e6; }
inline constexpr double to_ghz(double w) { return w / kTwoPi / 1e9; }
inline constexpr double to_us(double t) { return t * 1e6; }

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
   public:
    using Error::Error;
};

class UnknownLabel : public Error {
   public:
    using Error::Error;
};

class SpaceMismatch : public Error {
   public:
    using Error::Error;
};

/// Raised when a Fock cutoff cannot hold a state; carries the leaked probability.
class TruncationError : public Error {
   public:
    TruncationError(const std::string &msg, double leakage) : Error(msg), leakage_(leakage) {
    }
    double leakage() const {
        return leakage_;
    }

   private:
    double leakage_;
};

/// A closed-form map was asked to act outside the subspace where it is exact.
class PreconditionError : public Error {
   public:
    using Error::Error;
};

class ConfigError : public Error {
   public:
    ConfigError(const std::string &msg, int line = 0, int column = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"
                         : msg),
          message_(msg),
          line_(line),
          column_(column) {
    }
    /// The message without the position suffix.
    const std::string &message() const {
        return message_;
    }
    int line() const {
        return line_;
    }
    int column() const {
        return column_;
    }

   private:
    std::string message_;
    int line_;
    int column_;
};

class IntegrationError : public Error {
   public:
    using Error::Error;
};

class UnsupportedConfiguration : public Error {
   public:
    using Error::Error;
};

}  // namespace qtransfer

#endif
