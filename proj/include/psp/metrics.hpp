#pragma once

#include <string>
#include <vector>

namespace psp {

// One evaluation record pulled out of a metrics.jsonl stream.
struct EvalPoint {
    long step = 0;
    double return_mean = 0.0;
    double return_std = 0.0;
    double fg_mse = 0.0;
    double bg_mse = 0.0;
    bool has_recon = false;
};

// All `eval` records of a run, in file order. Throws std::runtime_error
// naming the path when the file is missing, unparseable, or contains no
// evaluation records (an empty or eval-free file is useless downstream).
std::vector<EvalPoint> read_eval_series(const std::string& metrics_path);

// Convenience: the last evaluation of a run (summaries key off this).
EvalPoint final_eval(const std::string& metrics_path);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    int n = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

}  // namespace psp
