#pragma once

#include <string>
#include <vector>

namespace psp {

// One timed kernel; `unit` says what a call covers (frame, batch, update).
struct BenchComponent {
    std::string name;
    std::string unit;
    double ms = 0.0;
};

// One feature combination timed over the live collect/update loop.
struct BenchRow {
    std::string weighting;  // none / policy
    bool segmentation = false;
    bool adversarial = false;
    double ms_per_step = 0.0;    // wall time per env step, updates included
    double steps_per_sec = 0.0;  // env frames per second
};

struct BenchReport {
    std::vector<BenchComponent> components;
    std::vector<BenchRow> rows;  // slowest feature set first
    long timed_steps = 0;
};

// Fixed synthetic workload: a small reafferent run at reduced batch and
// horizon. Components are timed standalone; each row times `timed_steps`
// env steps of the full collect-and-update loop at that feature setting.
BenchReport run_bench(long timed_steps = 96, int component_reps = 6);

std::string format_bench_report(const BenchReport& rep);

}  // namespace psp
