#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgan/encoding.hpp"
#include "cgan/geometry.hpp"
#include "cgan/mlp.hpp"

namespace cgan {

enum class Metric { l1, l2_squared };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

enum class StepTag { step1, step2 };
const char* to_string(StepTag t);

struct HyperParams {
    // Weights for the generator objective, in term order: forward adversarial,
    // reconstruction A, backward adversarial, reconstruction B, then the two
    // geometric terms used by step 2.
    std::array<double, 6> lambdas{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    Metric metric = Metric::l2_squared;
    AdamConfig adam{};
    int epochs = 1000;
    int batch_size = 35;
    std::uint64_t seed = 1;
    std::vector<int> hidden_dims{100, 100, 100, 100, 100};
    GeoConfig geo{};
    GeoMode geo_mode = GeoMode::paper;
    double decode_threshold = kDefaultDecodeThreshold;

    void validate(int n_a, int n_b) const;
};

// Affine map applied samplewise before the networks see the data. Only the
// lattice rows get a real shift/scale (fitted midrange and halfwidth over the
// training lattices); coordinate blocks pass through unchanged because they
// already live in [0,1) and zero padding has to stay zero.
struct Normalizer {
    Eigen::Vector3d lattice_shift = Eigen::Vector3d::Zero(); // per column
    Eigen::Vector3d lattice_scale = Eigen::Vector3d::Ones();

    static Normalizer fit(std::span<const DomainDataset* const> datasets);
    Eigen::VectorXd apply(const Eigen::VectorXd& phys) const;
    Eigen::VectorXd invert(const Eigen::VectorXd& net) const;
    // Chain rule for a gradient computed in physical units.
    Eigen::VectorXd gradient_to_net(const Eigen::VectorXd& phys_grad) const;
};

struct GanStepModel {
    StepTag step_tag = StepTag::step1;
    std::string element_a, element_b;
    Normalizer norm;
    std::uint64_t seed = 0;
    int epoch = 0;
    MlpParams gen_fwd;  // A-side input -> B-side lookalike
    MlpParams gen_bwd;  // B-side input -> A-side lookalike
    MlpParams disc_a;   // judges A-side samples
    MlpParams disc_b;
    AdamState opt_gen_fwd, opt_gen_bwd, opt_disc_a, opt_disc_b;
};

GanStepModel make_step_model(StepTag tag, const HyperParams& hp, const Normalizer& norm,
                             const std::string& element_a, const std::string& element_b);

std::uint64_t model_checksum(const GanStepModel& m);
void save_model(const std::filesystem::path& path, const GanStepModel& m);
GanStepModel load_model(const std::filesystem::path& path);

struct StepLosses {
    double adv_fwd = 0.0; // generator fooling loss, A -> B direction
    double rec_a = 0.0;   // round-trip reconstruction of A-side samples
    double adv_bwd = 0.0;
    double rec_b = 0.0;
    double geo1 = 0.0;
    double geo2 = 0.0;
    double loss_g = 0.0; // lambda-weighted sum of the six terms above
    double d_a = 0.0;
    double d_b = 0.0;
    double loss_d = 0.0; // d_a + d_b
    int geo_warnings = 0;
};

double reconstruction_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& rec, Metric metric);

// Batch means of every objective term at the current parameters, without
// updating anything. Step-1 models skip the geometric terms; step-2 models
// include them according to hp.geo_mode.
StepLosses evaluate_losses(const GanStepModel& m, std::span<const EncodedSample> batch_a,
                           std::span<const EncodedSample> batch_b, const HyperParams& hp);

struct GeneratorGradients {
    StepLosses losses; // discriminator entries stay zero here
    MlpGradients grad_fwd;
    MlpGradients grad_bwd;
};

// Generator objective on one batch pair plus the parameter gradients of both
// generators, discriminators held fixed. Runs the same code path as the
// generator update inside train_step; exists so the gradients can be checked
// against finite differences of loss_g.
GeneratorGradients generator_gradients(const GanStepModel& m, std::span<const EncodedSample> batch_a,
                                       std::span<const EncodedSample> batch_b, const HyperParams& hp);

struct EpochRecord {
    int epoch = 0;
    StepLosses losses;
};

struct TrainLog {
    StepTag step = StepTag::step1;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0; // reported in the manifest, never in the csv
};

using EpochCallback = std::function<void(const GanStepModel&, int epoch)>;

// Alternating updates, one discriminator step then one generator step per
// batch; epoch rows hold the batch-mean losses seen at update time.
TrainLog train_step(GanStepModel& m, const DomainDataset& ds_a, const DomainDataset& ds_b, const HyperParams& hp,
                    const EpochCallback& on_epoch = {});

void write_trainlog_csv(const std::filesystem::path& path, const TrainLog& log);

struct GeneratedSample {
    EncodedSample sample;
    std::string direction; // "fwd", "bwd" or "noise"
    int source_index = -1;
    std::string source_file;
    bool pseudo_binary = false; // step-1 outputs: one metal is a stand-in
};

// Runs the matching generator over the dataset, cycling through it when
// count exceeds the dataset size. Outputs carry unknown occupancy.
std::vector<GeneratedSample> generate(const GanStepModel& m, const DomainDataset& ds, int count);

enum class BaselineKind { classic_gan, discogan };

// The classic baseline split into its two halves so staged runs can train
// and sample in different processes yet produce the same candidates: the
// sampling noise stream is seeded from the model seed, not carried over from
// training.
GanStepModel classic_train(const DomainDataset& ds_a, const DomainDataset& ds_b, const HyperParams& hp, TrainLog* log,
                           const EpochCallback& on_epoch = {});
std::vector<GeneratedSample> classic_generate(const GanStepModel& m, int count);

struct BaselineResult {
    GanStepModel model;
    TrainLog log;
    std::vector<GeneratedSample> candidates;
};

// classic_gan: one generator fed with unit gaussian noise and one
// discriminator over the pooled datasets. discogan: the step-1 model alone,
// its raw cross-domain outputs taken as candidates.
BaselineResult run_baseline(BaselineKind kind, const DomainDataset& ds_a, const DomainDataset& ds_b,
                            const HyperParams& hp);

} // namespace cgan
