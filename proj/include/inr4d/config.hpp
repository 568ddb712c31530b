#pragma once

#include "inr4d/phantom.hpp"
#include "inr4d/training.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace inr4d {

/// Everything one CLI invocation needs. Read from `key = value` lines
/// (`#` starts a comment) and then patched by command-line overrides.
struct RunConfig {
    std::filesystem::path run_dir = "run";
    std::optional<std::filesystem::path> manifest;
    int threads = 1;

    PhantomConfig phantom;
    TrainConfig train;
    std::optional<std::filesystem::path> mask;
    std::vector<double> midpoints; // empty: consecutive-pair midpoints

    std::vector<double> infer_times; // empty: the series' own times
    double infer_scale = 1.0;
    std::string infer_from = "refine"; // or "pretrain"

    std::optional<std::filesystem::path> eval_input;
    std::optional<std::filesystem::path> eval_reference;
    std::optional<std::filesystem::path> eval_labels;
    std::optional<std::filesystem::path> eval_fields; // directory of field_<m>_<k>.dfld
    double eval_threshold = 0.75;
    int efc_axis = 2;
    double psnr_peak = 1.0;

    /// Sets one key; unknown keys and malformed values throw.
    void set(const std::string& key, const std::string& value);
    /// Applies "key=value".
    void apply_override(const std::string& assignment);
    void validate() const;

    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

    /// Every recognised key with its current value, in a stable order.
    std::map<std::string, std::string> dump() const;
    static const std::vector<std::string>& keys();
};

} // namespace inr4d
