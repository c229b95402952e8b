#include "psp/bench.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "psp/adversarial.hpp"
#include "psp/env.hpp"
#include "psp/saliency.hpp"
#include "psp/segmentation.hpp"
#include "psp/trainer.hpp"

namespace psp {
namespace {

EnvConfig bench_env() {
    EnvConfig e;
    e.image_size = 32;
    e.episode_len = 100;
    e.n_time_values = 100;
    e.seed = 7;
    return e;
}

TrainConfig bench_train(WeightingSource w, bool seg) {
    TrainConfig t;
    t.batch_size = 8;
    t.batch_length = 6;
    t.horizon = 8;
    t.imagination_starts = 12;
    t.warmup = 64;
    t.train_ratio = 0.25;
    t.buffer_capacity = 4000;
    t.weighting = w;
    t.segmentation_agg = seg;
    t.eval_episodes = 1;
    t.recon_eval_episodes = 0;
    return t;
}

AdvConfig bench_adv(bool enabled) {
    AdvConfig a;
    a.enabled = enabled;
    return a;
}

template <class F>
double time_ms(int reps, F&& fn) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

BenchReport run_bench(long timed_steps, int component_reps) {
    BenchReport rep;
    rep.timed_steps = timed_steps;
    const EnvConfig ecfg = bench_env();
    const int hw = ecfg.image_size * ecfg.image_size;

    // A stock of live frames for the image-space kernels.
    PointMassEnv env(ecfg);
    Rng frame_rng(91);
    std::vector<Array> frames;
    std::vector<SegmentMap> segs;
    env.reset(3);
    for (int i = 0; i < 24; ++i) {
        Eigen::Vector2d a(frame_rng.uniform() * 2 - 1, frame_rng.uniform() * 2 - 1);
        auto sr = env.step(a);
        frames.push_back(sr.obs.image);
        segs.push_back(segment_image(sr.obs.image, ecfg.image_size, ecfg.image_size));
    }

    {
        size_t idx = 0;
        double ms = time_ms(component_reps * 24, [&] {
            segment_image(frames[idx % frames.size()], ecfg.image_size, ecfg.image_size);
            ++idx;
        });
        rep.components.push_back({"segmentation", "frame", ms});
    }
    {
        Array g(hw);
        for (int i = 0; i < hw; ++i) g(i) = frame_rng.normal();
        size_t idx = 0;
        double ms = time_ms(component_reps * 24, [&] {
            aggregate_by_segment(g, segs[idx % segs.size()]);
            ++idx;
        });
        rep.components.push_back({"aggregation", "frame", ms});
    }
    {
        AdvHeadDef def;
        ParamStore store;
        Rng init(5);
        adv_init(def, store, init);
        Adam opt(AdamConfig{3e-4});
        const Eigen::Index rows = 48;
        Array embed_data(rows * def.embed);
        for (Eigen::Index i = 0; i < embed_data.size(); ++i) embed_data(i) = frame_rng.normal() * 0.3;
        Array act_data(rows * def.action_dim);
        for (Eigen::Index i = 0; i < act_data.size(); ++i) act_data(i) = frame_rng.uniform(-1, 1);
        Tensor embed({rows, def.embed}, std::move(embed_data));
        Tensor actions({rows, def.action_dim}, std::move(act_data));
        double ms = time_ms(component_reps * 4, [&] {
            adv_head_update(def, store, opt, embed, actions);
        });
        rep.components.push_back({"adversarial head", "update", ms});
    }

    // Trainer-level kernels on a shared prefilled buffer.
    {
        Trainer probe(ecfg, bench_train(WeightingSource::policy, true), bench_adv(true), 1234);
        probe.collect_steps(96);
        Rng sample_rng(17);
        const TrainConfig& tc = probe.train_config();
        WindowBatch batch =
            probe.buffer().sample(tc.batch_length, tc.batch_size, sample_rng);
        double ms = time_ms(component_reps, [&] { probe.compute_salience(batch); });
        rep.components.push_back({"salience gradient", "batch", ms});
    }
    {
        Trainer plain(ecfg, bench_train(WeightingSource::none, false), bench_adv(false), 1234);
        plain.collect_steps(96);
        double ms = time_ms(component_reps, [&] { plain.train_step(); });
        rep.components.push_back({"plain step", "update", ms});
    }

    // Feature rows over the live loop, slowest configuration first.
    struct RowSpec {
        WeightingSource w;
        bool seg, adv;
    };
    const RowSpec specs[] = {
        {WeightingSource::policy, true, true},
        {WeightingSource::policy, false, true},
        {WeightingSource::none, false, true},
        {WeightingSource::none, false, false},
    };
    for (const RowSpec& s : specs) {
        Trainer tr(ecfg, bench_train(s.w, s.seg), bench_adv(s.adv), 777);
        tr.collect_steps(80);  // past warmup; not timed
        using clock = std::chrono::steady_clock;
        auto t0 = clock::now();
        for (long k = 0; k < timed_steps; ++k) {
            tr.collect_steps(1);
            while (tr.pending_updates() > 0) tr.train_step();
        }
        auto t1 = clock::now();
        double total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        BenchRow row;
        row.weighting = to_string(s.w);
        row.segmentation = s.seg;
        row.adversarial = s.adv;
        row.ms_per_step = total_ms / timed_steps;
        row.steps_per_sec = 1000.0 * timed_steps / total_ms;
        rep.rows.push_back(row);
    }
    return rep;
}

std::string format_bench_report(const BenchReport& rep) {
    std::ostringstream out;
    char buf[160];
    out << "component timings (synthetic workload, 32x32 reafferent, batch 8x6)\n";
    for (const BenchComponent& c : rep.components) {
        std::snprintf(buf, sizeof(buf), "  %-18s %10.3f ms/%s\n", c.name.c_str(), c.ms,
                      c.unit.c_str());
        out << buf;
    }
    out << "\nfeature rows (" << rep.timed_steps
        << " env steps each, updates included; 1 update per 4 steps)\n";
    std::snprintf(buf, sizeof(buf), "  %-10s %-13s %-12s %12s %12s\n", "weighting", "segmentation",
                  "adversarial", "steps/sec", "ms/step");
    out << buf;
    for (const BenchRow& r : rep.rows) {
        std::snprintf(buf, sizeof(buf), "  %-10s %-13s %-12s %12.2f %12.2f\n",
                      r.weighting.c_str(), r.segmentation ? "on" : "off",
                      r.adversarial ? "on" : "off", r.steps_per_sec, r.ms_per_step);
        out << buf;
    }
    return out.str();
}

}  // namespace psp
