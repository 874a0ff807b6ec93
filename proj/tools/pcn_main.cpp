// pcn: experiment runner.
//
//   pcn list
//   pcn fetch-mnist [--dir DIR]
//   pcn <experiment> [--seeds N] [--steps N] [--step-size X] [--out DIR]
//                    [--config FILE] [--mnist-images PATH --mnist-labels PATH] ...
//
// Exit status: 0 all checks passed, 1 a check failed or the run broke,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "pcn/data.hpp"
#include "pcn/experiments.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

void list_experiments() {
  for (const auto& e : pcn::experiment_catalog()) {
    std::cout << e.name << "\t(" << e.default_seeds << " seeds)\t" << e.description << "\n";
  }
}

// Byte sizes of the uncompressed IDX files.
const std::map<std::string, std::uintmax_t> kMnistFiles{
    {"train-images-idx3-ubyte", 47040016},
    {"train-labels-idx1-ubyte", 60008},
    {"t10k-images-idx3-ubyte", 7840016},
    {"t10k-labels-idx1-ubyte", 10008},
};

bool verify_mnist(const fs::path& dir) {
  bool ok = true;
  for (const auto& [name, size] : kMnistFiles) {
    const fs::path p = dir / name;
    std::error_code ec;
    const auto got = fs::file_size(p, ec);
    if (ec || got != size) {
      std::cerr << p.string() << ": expected " << size << " bytes, "
                << (ec ? std::string("missing") : std::to_string(got)) << "\n";
      ok = false;
    }
  }
  return ok;
}

// The files ship uncompressed in the mnist-data npm package; npm and tar do
// the transfer and unpacking.
int fetch_mnist(const fs::path& dir) {
  fs::create_directories(dir);
  if (verify_mnist(dir)) {
    std::cout << "MNIST already present in " << dir.string() << "\n";
    return kOk;
  }
  const fs::path work = fs::temp_directory_path() / "pcn-mnist-fetch";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string cmd = "cd '" + work.string() + "' && npm pack mnist-data --silent >/dev/null && tar xzf mnist-data-*.tgz";
  if (std::system(cmd.c_str()) != 0) {
    std::cerr << "fetch-mnist: download failed (needs npm and tar)\n";
    return kFailed;
  }
  for (const auto& [name, size] : kMnistFiles) {
    (void)size;
    fs::copy_file(work / "package" / "data" / name, dir / name, fs::copy_options::overwrite_existing);
  }
  fs::remove_all(work);
  if (!verify_mnist(dir)) return kFailed;
  std::cout << "MNIST written to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive coding network experiments"};
  app.set_help_flag("-h,--help", "Show help");

  std::string experiment;
  app.add_option("experiment", experiment, "Experiment name, 'list' or 'fetch-mnist'")->required();

  std::string config_file;
  std::map<std::string, std::string> flags;
  auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  app.add_option("--config", config_file, "key = value file; flags override it");
  flag("--seeds", "seeds", "Number of seeds (0..N-1)");
  flag("--steps", "steps", "Inference steps");
  flag("--step-size", "step_size", "Inference step size");
  flag("--weight-lr", "weight_lr", "Weight learning rate");
  flag("--momentum", "momentum", "Nesterov momentum (0 for plain SGD)");
  flag("--epochs", "epochs", "Training epochs");
  flag("--batch-size", "batch_size", "Minibatch size (0 = full batch)");
  flag("--digits", "digits", "MNIST samples for fig4c/fig4d");
  flag("--train-size", "train_size", "MNIST training samples for fig4e");
  flag("--test-size", "test_size", "MNIST test samples for fig4e");
  flag("--ratios", "ratios", "Comma-separated precision ratios");
  flag("--record-every", "record_every", "Trace stride for per-step tables");
  flag("--out", "out", "Output directory");
  flag("--mnist-images", "mnist_images", "MNIST training images (IDX)");
  flag("--mnist-labels", "mnist_labels", "MNIST training labels (IDX)");
  flag("--mnist-test-images", "mnist_test_images", "MNIST test images (IDX)");
  flag("--mnist-test-labels", "mnist_test_labels", "MNIST test labels (IDX)");
  std::string fetch_dir = "mnist";
  app.add_option("--dir", fetch_dir, "Target directory for fetch-mnist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (experiment == "list") {
    list_experiments();
    return kOk;
  }
  if (experiment == "fetch-mnist") {
    try {
      return fetch_mnist(fetch_dir);
    } catch (const std::exception& e) {
      std::cerr << "fetch-mnist: " << e.what() << "\n";
      return kFailed;
    }
  }
  if (!pcn::find_experiment(experiment)) {
    std::cerr << "unknown experiment '" << experiment << "'; try 'pcn list'\n";
    return kUsage;
  }

  pcn::ExperimentConfig cfg;
  try {
    if (!config_file.empty()) {
      for (const auto& [k, v] : pcn::read_config_file(config_file)) pcn::apply_config_value(cfg, k, v);
    }
    for (const auto& [k, v] : flags) pcn::apply_config_value(cfg, k, v);
  } catch (const pcn::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  cfg.experiment = experiment;

  pcn::ExperimentResult result;
  try {
    result = pcn::run_experiment(cfg);
    pcn::write_experiment(result, experiment, cfg.out);
  } catch (const pcn::ConfigError& e) {
    std::cerr << experiment << ": " << e.what() << "\n";
    return kUsage;
  } catch (const pcn::DataFormatError& e) {
    std::cerr << experiment << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << experiment << ": " << e.what() << "\n";
    return kFailed;
  }

  for (const auto& n : result.notes) std::cout << "note: " << n << "\n";
  for (const auto& c : result.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  std::cout << "wrote " << result.tables.size() << " table(s) to " << cfg.out.string() << "\n";
  return result.passed() ? kOk : kFailed;
}
