#pragma once
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace beetag::nn {

// one layer descriptor line: kind kernel stride padding channels activation
struct LayerSpec {
  std::string kind;        // conv, linear, bn, pool, gap, resblock, dropout
  int kernel = 0;
  int stride = 1;
  std::string padding = "none";  // none | same
  int channels = 0;
  std::string activation = "-";  // relu, elu, sigmoid, linear, -
};

using NetworkSpec = std::vector<LayerSpec>;

inline std::string spec_to_string(const std::string& model, const NetworkSpec& spec) {
  std::ostringstream os;
  os << model << "\n";
  for (const auto& l : spec)
    os << l.kind << " " << l.kernel << " " << l.stride << " " << l.padding << " "
       << l.channels << " " << l.activation << "\n";
  return os.str();
}

inline std::pair<std::string, NetworkSpec> spec_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string model;
  if (!std::getline(is, model)) throw std::invalid_argument("empty network descriptor");
  NetworkSpec spec;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    LayerSpec l;
    if (!(ls >> l.kind >> l.kernel >> l.stride >> l.padding >> l.channels >> l.activation))
      throw std::invalid_argument("malformed descriptor line: " + line);
    spec.push_back(l);
  }
  return {model, spec};
}

}  // namespace beetag::nn
