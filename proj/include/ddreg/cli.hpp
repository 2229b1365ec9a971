#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddreg/evalloss.hpp"
#include "ddreg/normmatch.hpp"
#include "ddreg/pipeline.hpp"
#include "ddreg/synthmap.hpp"

namespace ddreg {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitInternal = 3 };

// Every tunable of every subcommand. Serializes to one JSON document; a
// --config file is merged over the defaults and explicit flags win over both.
struct RunConfig {
    SynthConfig synth;
    int n_pairs = 10;
    std::string src_image;
    std::string src_mask;
    Corruption corruption;
    PipelineConfig pipeline;
    LossConfig loss;
    int bench_trials = 100;
    double bench_noise = 1.0;
    double bench_margin = 10.0;
    int jobs = 1;

    nlohmann::json to_json() const;
    // Unknown keys are rejected with Errc::Format.
    void merge(const nlohmann::json &j);
};

// args excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace ddreg
