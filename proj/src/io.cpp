#include "quivernet/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "quivernet/errors.hpp"

namespace quivernet {

using nlohmann::json;

namespace {

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorCode::InvalidInput, where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, where + ": bad \"" + key + "\": " + e.what());
  }
}

Vector vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::InvalidInput, where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) fail(ErrorCode::InvalidInput, where + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

std::vector<std::size_t> vertex_list(const Quiver& q, const json& j, const std::string& where) {
  std::vector<std::size_t> out;
  for (const std::string& id : j.get<std::vector<std::string>>()) {
    auto v = q.find_vertex(id);
    if (!v) fail(ErrorCode::InvalidInput, where + ": unknown vertex \"" + id + "\"");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

IOSpec QuiverFile::iospec() const { return iospec(activation); }

IOSpec QuiverFile::iospec(ActivationKind kind) const {
  IOSpec io;
  io.inputs = inputs;
  io.outputs = outputs;
  for (std::size_t o : outputs) io.exprs.push_back(dag_expr(quiver, inputs, o, kind));
  io.validate(quiver, dims);
  return io;
}

QuiverFile parse_quiver_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "quiver file: expected an object");
  QuiverSpec spec;
  spec.vertices = get_field<std::vector<std::string>>(j, "vertices", "quiver file");
  if (!j.contains("arrows") || !j["arrows"].is_array()) fail(ErrorCode::InvalidInput, "quiver file: missing \"arrows\"");
  for (const json& a : j["arrows"])
    spec.arrows.push_back(ArrowSpec{get_field<std::string>(a, "id", "arrow"), get_field<std::string>(a, "tail", "arrow"),
                                    get_field<std::string>(a, "head", "arrow")});
  QuiverFile f;
  f.quiver = Quiver::from_spec(spec);
  const std::size_t nv = f.quiver.num_vertices();

  if (j.contains("io")) {
    const json& io = j["io"];
    if (io.contains("inputs")) f.inputs = vertex_list(f.quiver, io["inputs"], "io.inputs");
    if (io.contains("outputs")) f.outputs = vertex_list(f.quiver, io["outputs"], "io.outputs");
    if (io.contains("activation")) f.activation = parse_activation(get_field<std::string>(io, "activation", "io"));
  }
  for (std::size_t i = 0; i < nv; ++i) {
    if (!j.contains("io") || !j["io"].contains("inputs"))
      if (f.quiver.arrows_into(i).empty()) f.inputs.push_back(i);
    if (!j.contains("io") || !j["io"].contains("outputs"))
      if (f.quiver.arrows_out_of(i).empty()) f.outputs.push_back(i);
  }

  f.dims.d = get_field<std::vector<int>>(j, "d", "quiver file");
  if (f.dims.d.size() != nv) fail(ErrorCode::ShapeMismatch, "quiver file: \"d\" needs one entry per vertex");
  if (j.contains("n")) {
    f.dims.n = get_field<std::vector<int>>(j, "n", "quiver file");
  } else {
    f.dims.n = f.dims.d;
    for (std::size_t i = 0; i < nv; ++i) {
      const bool io_vertex = std::find(f.inputs.begin(), f.inputs.end(), i) != f.inputs.end() ||
                             std::find(f.outputs.begin(), f.outputs.end(), i) != f.outputs.end();
      if (!io_vertex) f.dims.n[i] += 1;
    }
  }
  check_dims(f.quiver, f.dims);
  return f;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidInput, path + ": " + e.what());
  }
}

QuiverFile load_quiver_file(const std::string& path) { return parse_quiver_json(load_json_file(path)); }

Samples load_dataset_csv(const std::string& path, int inputs, int outputs) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyDataset, path + ": no header");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double value = 0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos)
        fail(ErrorCode::InvalidInput, path + ":" + std::to_string(lineno) + ": not a number: \"" + cell + "\"");
      row.push_back(value);
    }
    if (static_cast<int>(row.size()) != inputs + outputs)
      fail(ErrorCode::ShapeMismatch, path + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(inputs + outputs) + " columns");
    rows.push_back(std::move(row));
  }
  Matrix X(static_cast<Eigen::Index>(rows.size()), inputs), Y(static_cast<Eigen::Index>(rows.size()), outputs);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < inputs + outputs; ++c) {
      if (c < inputs)
        X(static_cast<Eigen::Index>(r), c) = rows[r][c];
      else
        Y(static_cast<Eigen::Index>(r), c - inputs) = rows[r][c];
    }
  return dataset_samples(X, Y);
}

WebSpec parse_web_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "web file: expected an object");
  if (j.contains("uniform")) {
    const json& u = j["uniform"];
    return uniform_web_1d(get_field<double>(u, "lo", "uniform"), get_field<double>(u, "hi", "uniform"),
                          get_field<int>(u, "chambers", "uniform"));
  }
  WebSpec s;
  s.n = get_field<int>(j, "n", "web file");
  if (!j.contains("center")) fail(ErrorCode::InvalidInput, "web file: missing \"center\"");
  s.center = vector_of(j["center"], "web center");
  if (j.contains("rays"))
    for (const json& r : j["rays"]) s.rays.push_back(vector_of(r, "web ray"));
  if (j.contains("steps"))
    for (const json& st : j["steps"]) {
      WebStep w;
      w.slot = get_field<int>(st, "slot", "web step");
      if (!st.contains("normal")) fail(ErrorCode::InvalidInput, "web step: missing \"normal\"");
      w.cut.normal = vector_of(st["normal"], "web step normal");
      w.cut.offset = get_field<double>(st, "offset", "web step");
      w.t = get_field<double>(st, "t", "web step");
      s.steps.push_back(w);
    }
  return s;
}

WebSpec load_web_file(const std::string& path) { return parse_web_json(load_json_file(path)); }

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path);
  out << text;
}

}  // namespace quivernet
