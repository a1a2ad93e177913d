#pragma once

// Command-line front end. Every option is a `key = value` line in a config
// file and a `--key value` flag; flags win. Keys accept '-' or '_'.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grownet/train.hpp"

namespace grownet::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,  // gradcheck above tolerance
    kConfigError = 2,
    kNumericError = 3,
    kIoError = 4,
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    TrainConfig train;
    std::string command;           // grow | baseline | rbf-demo | report | transfer-rank | gradcheck
    std::string mode = "semi";     // semi | auto | baseline:<strategy>
    std::string strategy = "random-insertion";
    std::string model = "fnn";     // fnn | rbf
    std::string out;
    std::string sweep;             // seeds=a..b

    std::string data_train, data_val, data_test;
    std::string data;              // report / transfer-rank input
    std::string checkpoint;
    std::size_t inputs = 0;        // 0: count x* columns of the header
    std::size_t outputs = 0;
    bool standardize = true;

    // Synthetic data when no CSV is given.
    std::size_t gen_train = 1000, gen_val = 200, gen_test = 500;
    std::size_t gen_inputs = 4, gen_outputs = 1;
    double gen_noise = 0.0;
    double center = 0.1;
    std::size_t rbf_depth = 15;
    std::size_t rbf_train = 5000, rbf_val = 500, rbf_test = 1000;

    std::uint64_t data_seed = 0;   // synthetic data; `seed` drives the model only
    std::size_t gradcheck_nets = 50;
};

/// Sets one key. Throws ConfigError for an unknown key or a bad value.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// Every key set_key accepts, in a fixed order.
std::vector<std::string> known_keys();
/// One-line description of a key for --help.
std::string key_help(std::string_view key);

/// Applies every `key = value` line; '#' starts a comment.
void apply_config_text(RunConfig& cfg, std::string_view text);

/// Key -> value for everything that shapes a run (not out, config or sweep).
std::map<std::string, std::string> effective_config(const RunConfig& cfg);

/// Defaults of the RBF protocol, applied by rbf-demo before the config file.
void apply_rbf_preset(RunConfig& cfg);

/// The whole command line, argv[0] included. Returns an ExitCode.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace grownet::cli
