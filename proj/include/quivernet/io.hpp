#pragma once

#include <string>

#include <json.hpp>

#include "quivernet/approx.hpp"
#include "quivernet/network.hpp"
#include "quivernet/trainer.hpp"

namespace quivernet {

// Quiver file:
//   {"vertices": ["1","2","3"],
//    "arrows": [{"id": "a1", "tail": "1", "head": "2"}, ...],
//    "d": [1, 8, 1], "n": [1, 9, 1],
//    "io": {"inputs": ["1"], "outputs": ["3"], "activation": "sigma"}}
// "n" defaults to d at input and output vertices and d+1 elsewhere. "io"
// defaults to the sources as inputs and the sinks as outputs.
struct QuiverFile {
  Quiver quiver;
  DimVectors dims;
  std::vector<std::size_t> inputs, outputs;
  ActivationKind activation = ActivationKind::SigmaFramed;

  // One DAG expression per output vertex.
  IOSpec iospec() const;
  IOSpec iospec(ActivationKind kind) const;
};

QuiverFile parse_quiver_json(const nlohmann::json& j);
QuiverFile load_quiver_file(const std::string& path);

// CSV with a header row; the first `inputs` columns are X, the rest Y.
Samples load_dataset_csv(const std::string& path, int inputs, int outputs);

// {"n": 1, "center": [0.33], "rays": [[1], [-1]],
//  "steps": [{"slot": 1, "normal": [1], "offset": 0.66, "t": 0.1}]}
// or {"uniform": {"lo": 0, "hi": 1, "chambers": 3}}.
WebSpec parse_web_json(const nlohmann::json& j);
WebSpec load_web_file(const std::string& path);

nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);  // row-major nested arrays

nlohmann::json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace quivernet
