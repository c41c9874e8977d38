#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cgan/crossgan.hpp"
#include "cgan/encoding.hpp"
#include "cgan/feature_transfer.hpp"
#include "cgan/geometry.hpp"

namespace cgan {

enum class Method { crystalgan, crystalgan_noconstraints, discogan, classic_gan };
const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct RunConfig {
    std::filesystem::path domain_a_dir;
    std::filesystem::path domain_b_dir;
    std::filesystem::path out_dir = "runs";
    std::string element_a;
    std::string element_b;
    Method method = Method::crystalgan;
    std::vector<std::uint64_t> seeds{1};
    HyperParams hyper;
    int checkpoint_interval = 0; // extra checkpoints every n epochs, 0 = final only
    double pdf_bin_width = 0.1;

    void validate() const; // config-level checks only, no filesystem access
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& cfg);

std::filesystem::path artifact_dir_for(const RunConfig& cfg, std::uint64_t seed);

// One seed's working state. The stored config already carries the
// method-specific adjustments (the unconstrained variant zeroes the two
// geometric weights and switches the geometric mode off) and the seed.
struct PipelineContext {
    RunConfig cfg;
    std::uint64_t seed = 1;
    std::filesystem::path dir;
};

PipelineContext make_context(const RunConfig& cfg, std::uint64_t seed);

// Stages; each one reads its inputs from ctx.dir, writes its outputs there
// and updates manifest.json. They are the same functions whether the run is
// driven end to end or stage by stage from the command line.
void stage_encode(const PipelineContext& ctx);
void stage_train_step1(const PipelineContext& ctx);
void stage_transfer(const PipelineContext& ctx);
void stage_train_step2(const PipelineContext& ctx);
void stage_generate(const PipelineContext& ctx);
void stage_validate(const PipelineContext& ctx);
void stage_pdf(const PipelineContext& ctx);

// Full pipeline for every configured seed; returns out_dir. The config is
// checked up front so an invalid one fails before any artifact is written.
std::filesystem::path run_pipeline(const RunConfig& cfg);

struct ValidationEntry {
    std::string id;
    bool parsed = false;
    std::string error;
    StructureVerdict verdict;
};

struct ValidationReport {
    std::string method;
    std::string system; // "A-B-H"
    std::uint64_t seed = 0;
    bool require_ternary = true;
    double d1 = 1.8;
    double d2 = 3.0;
    int total = 0;
    int good = 0;           // valid distances and, when required, ternary
    int good_any_arity = 0; // valid distances regardless of species count
    std::vector<ValidationEntry> entries;
};

// Validates every POSCAR in `dir`. When a provenance file is given,
// candidates that never decoded into a file are counted as failures so the
// totals reflect everything the generator produced.
ValidationReport validate_directory(const std::filesystem::path& dir, const GeoConfig& geo, bool require_ternary,
                                    const std::filesystem::path& provenance = {});

std::string render_validation_report(const ValidationReport& r);
void write_validation_report(const std::filesystem::path& dir, const ValidationReport& r);
ValidationReport read_validation_report_json(const std::filesystem::path& path);

struct ReportCell {
    int good = 0;
    int total = 0;
    std::vector<std::uint64_t> seeds;
};

struct ComparisonReport {
    // system -> method name -> aggregated counts
    std::map<std::string, std::map<std::string, ReportCell>> cells;
};

// Reads validation/report.json from each artifact directory, recounting each
// file's verdicts to guard against stale summaries.
ComparisonReport build_comparison(const std::vector<std::filesystem::path>& artifact_dirs);
std::string render_comparison(const ComparisonReport& rep);
std::string comparison_to_json_text(const ComparisonReport& rep);

} // namespace cgan
