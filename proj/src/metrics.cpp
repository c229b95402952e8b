#include "psp/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace psp {

std::vector<EvalPoint> read_eval_series(const std::string& metrics_path) {
    std::ifstream in(metrics_path);
    if (!in) throw std::runtime_error("cannot open metrics file '" + metrics_path + "'");
    std::vector<EvalPoint> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(metrics_path + ":" + std::to_string(lineno) +
                                     ": bad JSON record: " + e.what());
        }
        if (!rec.contains("eval")) continue;
        const auto& ev = rec.at("eval");
        EvalPoint p;
        p.step = rec.value("step", 0L);
        p.return_mean = ev.at("return_mean").get<double>();
        p.return_std = ev.at("return_std").get<double>();
        if (ev.contains("fg_mse")) {
            p.fg_mse = ev.at("fg_mse").get<double>();
            p.bg_mse = ev.at("bg_mse").get<double>();
            p.has_recon = true;
        }
        out.push_back(p);
    }
    if (out.empty())
        throw std::runtime_error("no evaluation records in metrics file '" + metrics_path + "'");
    return out;
}

EvalPoint final_eval(const std::string& metrics_path) {
    return read_eval_series(metrics_path).back();
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd s;
    s.n = static_cast<int>(xs.size());
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / s.n;
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / s.n);
    return s;
}

}  // namespace psp
