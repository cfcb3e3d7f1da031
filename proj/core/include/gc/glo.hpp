#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gc/adam.hpp"
#include "gc/body.hpp"
#include "gc/dataset.hpp"
#include "gc/draping.hpp"

namespace gc {

struct GloConfig {
    int steps = 2000;
    int batch = 4;
    double lr_code = 1e-2;
    double lr_net = 1e-3;
    std::uint64_t seed = 0;
    int log_every = 50;
    int checkpoint_every = 0;           // epochs; 0 = no mid-run checkpoints
    std::string checkpoint_prefix;      // required when checkpoint_every > 0
    int jobs = 1;
    std::function<void(int, double)> on_log;  // (step, mean batch loss)
};

struct TrainLog {
    std::vector<double> step_loss;   // mean emd over the batch, per step
    std::vector<double> epoch_mean;  // mean of step losses per epoch
    int steps_per_epoch = 0;
    double max_code_norm = 0;        // across all post-step clip checks
};

// Joint minibatch Adam over the draping parameters and the per-outfit codes
// (one code per outfit, updated only on steps where the outfit is sampled);
// every touched code is projected onto the unit ball after its update. The
// loss is the auction-EMD between the deformed body cloud and the target,
// with the matching frozen per step. Aborts with a diagnostic on a
// non-finite loss.
TrainLog glo_train(DrapingModel& model, std::vector<Tensor>& codes, const TrainingSet& data,
                   const BodyTemplate& tmpl, const GloConfig& config);

// Mean emd_approx over the whole set under the current model/codes (used to
// compare against the untrained baseline). Seeds are drawn from `seed`.
double glo_eval(DrapingModel& model, const std::vector<Tensor>& codes, const TrainingSet& data,
                const BodyTemplate& tmpl, std::uint64_t seed, int jobs = 1);

}  // namespace gc
