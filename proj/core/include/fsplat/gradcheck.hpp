#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsplat {

struct GradCheckEntry {
    std::string module;
    std::string group;
    size_t checked = 0;
    double max_abs_diff = 0.0;
    double max_rel_err = 0.0;
    double rel_tol = 1e-3;
    bool pass = true;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;

    std::string full_name() const { return module + "." + group; }
};

struct GradCheckOptions {
    // Empty runs every module; otherwise one of rasterizer, deformation,
    // shf, thf, objective.
    std::string module;
    // Fault-injection hook: analytic gradients of groups whose full name
    // contains this substring get their sign flipped, which must fail the
    // check naming that group.
    std::string inject_sign_error;
    uint64_t seed = 1234;
    double step = 1e-4;
};

// Central-difference verification of every analytic gradient path on tiny
// randomized scenes. Pass criterion per coordinate:
//   |analytic - numeric| <= 1e-7 + rel_tol * max(|analytic|, |numeric|).
std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& options);

bool gradcheck_all_pass(const std::vector<GradCheckEntry>& entries);

}  // namespace fsplat
