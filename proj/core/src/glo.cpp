#include "gc/glo.hpp"

#include <cmath>

#include "gc/error.hpp"
#include "gc/metrics.hpp"
#include "gc/parallel.hpp"

namespace gc {
namespace {

struct Sample {
    int outfit;   // index into data.outfits / codes
    int frame;    // index into outfit.frames
};

// EMD loss section on the tape: mean_i sqrt(|cloud_i - target_perm(i)|^2 + floor),
// identical to emd_frozen so logged values match the metric exactly.
Var emd_loss_graph(Tape& tape, Var cloud, const PointCloud3& target,
                   const std::vector<int>& perm) {
    const int n = int(perm.size());
    Tensor matched = Tensor::zeros({n, 3});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) matched.at(i, k) = target.p(perm[size_t(i)])[k];
    Var diff = sub(cloud, tape.constant(std::move(matched)));
    Var sq = mul(diff, diff);
    Var row = matmul(sq, tape.constant(Tensor({3, 1}, {1, 1, 1})));  // row sums [n,1]
    Var dist = sqrt_op(add(row, tape.scalar(1e-18)));
    return reduce_mean(dist);
}

}  // namespace

TrainLog glo_train(DrapingModel& model, std::vector<Tensor>& codes, const TrainingSet& data,
                   const BodyTemplate& tmpl, const GloConfig& config) {
    const int n_outfits = int(data.outfits.size());
    if (n_outfits == 0) throw NumericError("glo_train: empty dataset");
    if (int(codes.size()) != n_outfits)
        throw NumericError("glo_train: need one code per outfit");
    for (const Tensor& z : codes)
        if (z.shape != std::vector<int>{model.dims.code_dim} || !z.requires_grad)
            throw NumericError("glo_train: codes must be [code_dim] with requires_grad");

    // flatten and cache the draping inputs once
    std::vector<Sample> samples;
    std::vector<std::vector<PointCloud3>> body_clouds(static_cast<size_t>(n_outfits));
    for (int o = 0; o < n_outfits; ++o) {
        const auto& outfit = data.outfits[size_t(o)];
        body_clouds[size_t(o)].reserve(outfit.frames.size());
        for (int f = 0; f < int(outfit.frames.size()); ++f) {
            samples.push_back({o, f});
            body_clouds[size_t(o)].push_back(
                body_point_cloud(pose_body(tmpl, outfit.frames[size_t(f)].pose)));
        }
    }
    const int n_samples = int(samples.size());
    const int batch = std::min(config.batch, n_samples);

    AdamState net_state;
    net_state.learning_rate = config.lr_net;
    std::vector<AdamState> code_state(static_cast<size_t>(n_outfits));
    for (auto& st : code_state) st.learning_rate = config.lr_code;

    Rng root(config.seed);
    Rng shuffle_rng = root.fork("shuffle");
    std::vector<int> order(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) order[size_t(i)] = i;

    TrainLog log;
    log.steps_per_epoch = (n_samples + batch - 1) / batch;
    const std::vector<Tensor*> net_params = model.params();

    int cursor = n_samples;  // forces a shuffle on the first step
    for (int step = 0; step < config.steps; ++step) {
        if (cursor + batch > n_samples) {
            for (int i = n_samples - 1; i > 0; --i)
                std::swap(order[size_t(i)], order[shuffle_rng.below(std::uint64_t(i) + 1)]);
            cursor = 0;
        }

        struct Slot {
            double loss = 0;
            std::vector<dvec> net_grads;
            dvec code_grad;
            int outfit = 0;
        };
        std::vector<Slot> slots(static_cast<size_t>(batch));
        const bool parallel = config.jobs > 1;

        auto run_element = [&](int slot_idx) {
            const int sample_id = order[size_t(cursor + slot_idx)];
            const Sample s = samples[size_t(sample_id)];
            const auto& frame = data.outfits[size_t(s.outfit)].frames[size_t(s.frame)];
            const PointCloud3& body = body_clouds[size_t(s.outfit)][size_t(s.frame)];
            // per-sample seed draw, stable across epochs
            Rng seed_rng = root.fork("seeds", std::uint64_t(sample_id));
            const SeedDraw draw = draw_seeds(body.count(), model.dims.out_points, seed_rng);

            // When parallel, gradients must land in per-slot buffers; clone
            // the parameter tensors so leaf accumulation stays isolated.
            Slot& slot = slots[size_t(slot_idx)];
            slot.outfit = s.outfit;
            if (!parallel) {
                Tape tape;
                Var z = tape.param(codes[size_t(s.outfit)], "code");
                Var cloud = deform_graph(tape, model, body, draw, z, true);
                PointCloud3 pred;
                pred.xyz.assign(cloud.value().data.begin(), cloud.value().data.end());
                const Assignment match = auction_assign(pred, frame.target);
                Var loss = mul(emd_loss_graph(tape, cloud, frame.target, match.perm),
                               tape.scalar(1.0 / batch));
                slot.loss = loss.value().data[0] * batch;
                if (!std::isfinite(slot.loss))
                    throw NumericError("glo_train: non-finite loss at step " +
                                       std::to_string(step) + " (outfit " +
                                       std::to_string(s.outfit) + ", frame " +
                                       std::to_string(frame.frame_id) + ")");
                tape.backward(loss);
            } else {
                DrapingModel local = model;  // copies parameters; grads isolated
                Tensor code = codes[size_t(s.outfit)];
                Tape tape;
                Var z = tape.param(code, "code");
                Var cloud = deform_graph(tape, local, body, draw, z, true);
                PointCloud3 pred;
                pred.xyz.assign(cloud.value().data.begin(), cloud.value().data.end());
                const Assignment match = auction_assign(pred, frame.target);
                Var loss = mul(emd_loss_graph(tape, cloud, frame.target, match.perm),
                               tape.scalar(1.0 / batch));
                slot.loss = loss.value().data[0] * batch;
                if (!std::isfinite(slot.loss))
                    throw NumericError("glo_train: non-finite loss at step " +
                                       std::to_string(step) + " (outfit " +
                                       std::to_string(s.outfit) + ", frame " +
                                       std::to_string(frame.frame_id) + ")");
                tape.backward(loss);
                for (Tensor* t : local.params())
                    slot.net_grads.push_back(t->grad.empty() ? dvec(t->data.size(), 0.0)
                                                             : t->grad);
                slot.code_grad = code.grad.empty() ? dvec(code.data.size(), 0.0) : code.grad;
            }
        };

        if (parallel) {
            parallel_for(batch, config.jobs, run_element);
            // deterministic ordered reduction into the shared tensors
            for (int b = 0; b < batch; ++b) {
                Slot& slot = slots[size_t(b)];
                for (size_t t = 0; t < net_params.size(); ++t) {
                    Tensor* p = net_params[t];
                    if (p->grad.size() != p->data.size()) p->grad.assign(p->data.size(), 0.0);
                    for (size_t i = 0; i < p->grad.size(); ++i)
                        p->grad[i] += slot.net_grads[t][i];
                }
                Tensor& z = codes[size_t(slot.outfit)];
                if (z.grad.size() != z.data.size()) z.grad.assign(z.data.size(), 0.0);
                for (size_t i = 0; i < z.grad.size(); ++i) z.grad[i] += slot.code_grad[i];
            }
        } else {
            for (int b = 0; b < batch; ++b) run_element(b);
        }

        double batch_loss = 0;
        for (const Slot& s : slots) batch_loss += s.loss;
        batch_loss /= batch;
        log.step_loss.push_back(batch_loss);

        adam_step(net_params, net_state);
        // distinct codes touched this step, in batch order
        std::vector<int> touched;
        for (const Slot& s : slots)
            if (std::find(touched.begin(), touched.end(), s.outfit) == touched.end())
                touched.push_back(s.outfit);
        for (int o : touched) {
            adam_step({&codes[size_t(o)]}, code_state[size_t(o)]);
            clip_code(codes[size_t(o)]);
        }
        for (const Tensor& z : codes) log.max_code_norm = std::max(log.max_code_norm, code_norm(z));

        cursor += batch;
        if (config.on_log && config.log_every > 0 &&
            (step % config.log_every == 0 || step + 1 == config.steps))
            config.on_log(step, batch_loss);
    }

    // epoch means for the training log
    for (size_t s = 0; s < log.step_loss.size(); s += size_t(log.steps_per_epoch)) {
        double sum = 0;
        size_t hi = std::min(log.step_loss.size(), s + size_t(log.steps_per_epoch));
        for (size_t i = s; i < hi; ++i) sum += log.step_loss[i];
        log.epoch_mean.push_back(sum / double(hi - s));
    }
    return log;
}

double glo_eval(DrapingModel& model, const std::vector<Tensor>& codes, const TrainingSet& data,
                const BodyTemplate& tmpl, std::uint64_t seed, int jobs) {
    std::vector<std::pair<int, int>> samples;
    for (int o = 0; o < int(data.outfits.size()); ++o)
        for (int f = 0; f < int(data.outfits[size_t(o)].frames.size()); ++f)
            samples.emplace_back(o, f);
    if (samples.empty()) throw NumericError("glo_eval: empty dataset");

    Rng root(seed);
    std::vector<double> losses(samples.size(), 0.0);
    parallel_for(int(samples.size()), jobs, [&](int i) {
        const auto [o, f] = samples[size_t(i)];
        const auto& frame = data.outfits[size_t(o)].frames[size_t(f)];
        const PointCloud3 body = body_point_cloud(pose_body(tmpl, frame.pose));
        Rng seed_rng = root.fork("eval", std::uint64_t(i));
        DrapingModel local = model;
        const PointCloud3 pred = deform(local, body, codes[size_t(o)], seed_rng);
        losses[size_t(i)] = emd_approx(pred, frame.target).value;
    });
    double sum = 0;
    for (double l : losses) sum += l;
    return sum / double(losses.size());
}

}  // namespace gc
