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

#ifndef QTRANSFER_SRC_INTEGRATOR_H
#define QTRANSFER_SRC_INTEGRATOR_H

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "qtransfer/dynamics.h"

namespace qtransfer::detail {

/// Explicit stepper for dy/dt = f(t, y) on an Eigen dense type (vector or matrix).
/// Adaptive mode is the Dormand–Prince 5(4) pair; fixed mode is classic RK4.
template <class T>
class Stepper {
   public:
    using Rhs = std::function<void(double, const T &, T &)>;

    Stepper(Rhs f, Method method, double rtol, double atol, double max_step)
        : f_(std::move(f)), method_(method), rtol_(rtol), atol_(atol), max_step_(max_step) {
    }

    void reset(double t, const T &y) {
        t_ = t;
        y_ = y;
        h_ = 0.0;
        have_k1_ = false;
    }

    double t() const {
        return t_;
    }
    const T &y() const {
        return y_;
    }
    T &mutable_y() {
        have_k1_ = false;
        return y_;
    }
    /// Size of the last accepted step.
    double last_step() const {
        return last_h_;
    }
    std::size_t rhs_evaluations() const {
        return n_rhs_;
    }

    /// Takes one accepted step that does not pass t_end.
    void step(double t_end) {
        double remaining = t_end - t_;
        if (remaining <= 0.0) {
            return;
        }
        double h_min = 1e-13 * std::max(std::abs(t_end), max_step_);
        if (method_ == Method::RK4) {
            double h = std::min(max_step_, remaining);
            if (remaining - h < 1e-9 * h) {
                h = remaining;
            }
            raw_rk4(t_, y_, h, ynew_);
            y_.swap(ynew_);
            t_ = h == remaining ? t_end : t_ + h;
            last_h_ = h;
            return;
        }
        if (!have_k1_) {
            eval(t_, y_, k1_);
            have_k1_ = true;
        }
        if (h_ <= 0.0) {
            h_ = initial_step(remaining);
        }
        while (true) {
            double h = std::min({h_, max_step_, remaining});
            bool last = false;
            if (remaining - h < 1e-9 * h) {
                h = remaining;
                last = true;
            }
            double err = dopri_trial(t_, y_, h);
            if (err <= 1.0) {
                t_ = last ? t_end : t_ + h;
                y_.swap(ynew_);
                k1_.swap(k7_);
                last_h_ = h;
                double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                h_ = h * fac;
                return;
            }
            h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            if (h_ < h_min) {
                std::ostringstream msg;
                msg << "step size underflow at t = " << t_ << " s (h = " << h_ << ")";
                throw IntegrationError(msg.str());
            }
        }
    }

    /// One unchecked step of size h from (t0, y0); used to locate events inside a step.
    void raw_step(double t0, const T &y0, double h, T &out) {
        if (method_ == Method::RK4) {
            raw_rk4(t0, y0, h, out);
            return;
        }
        eval(t0, y0, r1_);
        dopri_stages(t0, y0, h, r1_, out, nullptr);
    }

   private:
    void eval(double t, const T &y, T &dy) {
        f_(t, y, dy);
        n_rhs_++;
    }

    double initial_step(double span) {
        double n0 = k1_.cwiseAbs().maxCoeff();
        double ny = y_.cwiseAbs().maxCoeff();
        double h = n0 > 0.0 ? 0.01 * (atol_ + rtol_ * ny) / n0 : span;
        h = std::max(h, 1e-6 * span);
        return std::min({h, max_step_, span});
    }

    void raw_rk4(double t0, const T &y0, double h, T &out) {
        eval(t0, y0, s1_);
        tmp_ = y0 + (0.5 * h) * s1_;
        eval(t0 + 0.5 * h, tmp_, s2_);
        tmp_ = y0 + (0.5 * h) * s2_;
        eval(t0 + 0.5 * h, tmp_, s3_);
        tmp_ = y0 + h * s3_;
        eval(t0 + h, tmp_, s4_);
        out = y0 + (h / 6.0) * (s1_ + 2.0 * s2_ + 2.0 * s3_ + s4_);
    }

    // Stages 2..6 given k1; writes the 5th-order solution to out and (optionally) the error.
    void dopri_stages(double t0, const T &y0, double h, const T &k1, T &out, T *err) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                                b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        tmp_ = y0 + (h * a21) * k1;
        eval(t0 + c2 * h, tmp_, k2_);
        tmp_ = y0 + h * (a31 * k1 + a32 * k2_);
        eval(t0 + c3 * h, tmp_, k3_);
        tmp_ = y0 + h * (a41 * k1 + a42 * k2_ + a43 * k3_);
        eval(t0 + c4 * h, tmp_, k4_);
        tmp_ = y0 + h * (a51 * k1 + a52 * k2_ + a53 * k3_ + a54 * k4_);
        eval(t0 + c5 * h, tmp_, k5_);
        tmp_ = y0 + h * (a61 * k1 + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        eval(t0 + h, tmp_, k6_);
        out = y0 + h * (b1 * k1 + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        if (err) {
            eval(t0 + h, out, k7_);
            *err = h * (e1 * k1 + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
        }
    }

    double dopri_trial(double t0, const T &y0, double h) {
        dopri_stages(t0, y0, h, k1_, ynew_, &errv_);
        auto scale = (atol_ + rtol_ * y0.cwiseAbs().cwiseMax(ynew_.cwiseAbs()).array());
        double s = (errv_.cwiseAbs().array() / scale).square().sum();
        double e = std::sqrt(s / static_cast<double>(errv_.size()));
        if (!std::isfinite(e)) {
            throw IntegrationError("non-finite error estimate");
        }
        return e;
    }

    Rhs f_;
    Method method_;
    double rtol_, atol_, max_step_;
    double t_ = 0.0, h_ = 0.0, last_h_ = 0.0;
    bool have_k1_ = false;
    std::size_t n_rhs_ = 0;
    T y_, ynew_, tmp_, errv_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, r1_;
    T s1_, s2_, s3_, s4_;
};

}  // namespace qtransfer::detail

#endif
