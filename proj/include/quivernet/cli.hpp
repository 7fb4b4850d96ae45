#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quivernet/trainer.hpp"

namespace quivernet {

struct RunConfig {
  std::string subcommand;  // verify | topology | train | approx
  std::string quiver_path;
  std::string data_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool to_stdout = false;
  TrainConfig train;
  std::string activation;  // empty: the quiver file's choice

  // verify
  int samples = 100;
  double tol = 1e-8;

  // topology
  std::string chain = "both";
  int hidden = 3;
  std::string pattern = "600,m,m,m,10";
  std::string sweep = "1..64";

  // approx
  std::string target = "step";  // step | sin | path to a CSV of x,y samples
  std::string web_path;
  std::vector<double> ts = {5, 10, 20};
  double lo = 0, hi = 1;

  // Throws InvalidInput for missing files or an unwritable output directory.
  void validate() const;
};

// Exit codes: 0 success, 1 usage, 2 invalid input, 3 numerical failure.
int run(int argc, char** argv);

}  // namespace quivernet
