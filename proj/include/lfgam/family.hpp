#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "lfgam/errors.hpp"

namespace lfgam {

enum class FamilyKind { Gaussian, Poisson, NegBin };

/// Response distribution with its canonical-ish link: identity for the
/// Gaussian, log for Poisson and negative binomial. The negative binomial
/// has Var(y) = mu + kappa * mu^2.
struct Family {
    FamilyKind kind = FamilyKind::Gaussian;
    double kappa = 1.0;

    static Family gaussian() { return {FamilyKind::Gaussian, 1.0}; }
    static Family poisson() { return {FamilyKind::Poisson, 1.0}; }
    static Family negbin(double kappa) {
        if (!(kappa > 0)) throw Error(ErrorKind::Validation, "negative binomial kappa must be positive");
        return {FamilyKind::NegBin, kappa};
    }

    [[nodiscard]] std::string name() const {
        switch (kind) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::Poisson: return "poisson";
        case FamilyKind::NegBin: return "negbin";
        }
        return "?";
    }

    [[nodiscard]] std::string link_name() const { return kind == FamilyKind::Gaussian ? "identity" : "log"; }
    [[nodiscard]] bool fixed_scale() const noexcept { return kind != FamilyKind::Gaussian; }

    [[nodiscard]] double linkinv(double eta) const {
        return kind == FamilyKind::Gaussian ? eta : std::exp(std::min(eta, 700.0));
    }
    [[nodiscard]] double link(double mu) const { return kind == FamilyKind::Gaussian ? mu : std::log(mu); }
    /// d mu / d eta
    [[nodiscard]] double mu_eta(double eta) const {
        return kind == FamilyKind::Gaussian ? 1.0 : std::exp(std::min(eta, 700.0));
    }
    [[nodiscard]] double variance(double mu) const {
        switch (kind) {
        case FamilyKind::Gaussian: return 1.0;
        case FamilyKind::Poisson: return mu;
        case FamilyKind::NegBin: return mu + kappa * mu * mu;
        }
        return 1.0;
    }

    [[nodiscard]] double dev_resid(double y, double mu, double w) const {
        switch (kind) {
        case FamilyKind::Gaussian: return w * (y - mu) * (y - mu);
        case FamilyKind::Poisson: {
            const double t = y > 0 ? y * std::log(y / mu) : 0.0;
            return 2.0 * w * (t - (y - mu));
        }
        case FamilyKind::NegBin: {
            const double theta = 1.0 / kappa;
            const double t = y > 0 ? y * std::log(y / mu) : 0.0;
            return 2.0 * w * (t - (y + theta) * std::log((y + theta) / (mu + theta)));
        }
        }
        return 0.0;
    }

    [[nodiscard]] double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::VectorXd& w) const {
        double d = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) d += dev_resid(y(i), mu(i), w(i));
        return d;
    }

    /// Log-likelihood at mu; `phi` is the Gaussian variance.
    [[nodiscard]] double loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::VectorXd& w,
                                double phi) const {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double yi = y(i), mi = mu(i), wi = w(i);
            switch (kind) {
            case FamilyKind::Gaussian:
                if (wi > 0)
                    ll += -0.5 * (wi * (yi - mi) * (yi - mi) / phi + std::log(2.0 * std::numbers::pi * phi / wi));
                break;
            case FamilyKind::Poisson:
                ll += wi * ((yi > 0 ? yi * std::log(mi) : 0.0) - mi - std::lgamma(yi + 1.0));
                break;
            case FamilyKind::NegBin: {
                const double theta = 1.0 / kappa;
                ll += wi * (std::lgamma(yi + theta) - std::lgamma(theta) - std::lgamma(yi + 1.0) +
                            theta * std::log(theta / (theta + mi)) +
                            (yi > 0 ? yi * std::log(mi / (theta + mi)) : 0.0));
                break;
            }
            }
        }
        return ll;
    }

    void validate_response(const Eigen::VectorXd& y) const {
        for (double v : y) {
            if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "response has non-finite values");
            if (kind != FamilyKind::Gaussian && (v < 0 || v != std::floor(v)))
                throw Error(ErrorKind::Validation,
                            name() + " family needs a nonnegative integer response, found " + std::to_string(v));
        }
    }

    [[nodiscard]] Eigen::VectorXd initial_mu(const Eigen::VectorXd& y) const {
        if (kind == FamilyKind::Gaussian) return y;
        return y.array() + 0.1;
    }
};

inline FamilyKind family_from_string(const std::string& s) {
    if (s == "gaussian") return FamilyKind::Gaussian;
    if (s == "poisson") return FamilyKind::Poisson;
    if (s == "negbin") return FamilyKind::NegBin;
    throw Error(ErrorKind::Input, "unknown family '" + s + "' (expected gaussian, poisson or negbin)");
}

} // namespace lfgam
