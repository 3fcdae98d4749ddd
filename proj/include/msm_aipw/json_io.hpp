#pragma once

#include <span>

#include <json.hpp>

#include "msm_aipw/estimator.hpp"
#include "msm_aipw/oracle.hpp"

namespace msm_aipw {

// [[t, value], ...]
nlohmann::json step_to_json(const StepFunction& f);
nlohmann::json risk_to_json(std::span<const RiskContrast> rc);

// Fit reports share {estimator, beta_hat, se_model, se_boot, ci, lambda_hat,
// diagnostics}; fields an estimator does not produce are null.
nlohmann::json fit_to_json(const AipwFit& fit);
nlohmann::json fit_to_json(const IpwFit& fit);
nlohmann::json fit_to_json(const NaiveCoxFit& fit);
nlohmann::json fit_to_json(const FullDataFit& fit);

// {beta_star, h_residual, beta_of_t, lambda_star} on `points` equally spaced times in (0, tau].
nlohmann::json oracle_to_json(const EstimandOracle& oracle, const PotentialOutcomeLaw& law, int points = 100);

}  // namespace msm_aipw
