#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dysuse/tensor.hpp"

namespace dysuse {

// Text checkpoint: `config` lines, then one `param` header plus its values
// per tensor, closed by `end`. Values carry 17 significant digits so doubles
// round-trip bit-faithfully.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, Tensor>> params;

  std::string config_value(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return v;
    throw ValidationError("checkpoint: missing config key " + key);
  }
  bool has_config(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return true;
    return false;
  }
};

inline std::string write_checkpoint(const Checkpoint& ck) {
  std::ostringstream out;
  out << "dysuse-checkpoint v1\n";
  for (const auto& [k, v] : ck.config) out << "config " << k << " " << v << "\n";
  char buf[40];
  for (const auto& [name, t] : ck.params) {
    out << "param " << name << " " << t.rank();
    for (std::size_t d : t.shape()) out << " " << d;
    out << "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", t.value()[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == t.size() ? "\n" : " ");
    }
    if (t.size() == 0) out << "\n";
  }
  out << "end\n";
  return out.str();
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << write_checkpoint(ck);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& origin = "checkpoint") {
  std::string header;
  if (!std::getline(in, header) || header.rfind("dysuse-checkpoint", 0) != 0)
    throw ParseError(origin + ": not a dysuse checkpoint");
  if (header != "dysuse-checkpoint v1")
    throw ParseError(origin + ": unsupported checkpoint version");
  Checkpoint ck;
  std::string tok;
  bool closed = false;
  while (in >> tok) {
    if (tok == "end") {
      closed = true;
      break;
    }
    if (tok == "config") {
      std::string key;
      in >> key;
      std::string rest;
      std::getline(in, rest);
      const auto first = rest.find_first_not_of(" \t");
      ck.config.emplace_back(key, first == std::string::npos ? "" : rest.substr(first));
    } else if (tok == "param") {
      std::string name;
      std::size_t rank = 0;
      if (!(in >> name >> rank)) throw ParseError(origin + ": malformed param header");
      std::vector<std::size_t> shape(rank);
      for (auto& d : shape)
        if (!(in >> d)) throw ParseError(origin + ": malformed param shape for " + name);
      std::vector<double> values(numel(shape));
      for (auto& v : values)
        if (!(in >> v)) throw ParseError(origin + ": truncated values for param " + name);
      ck.params.emplace_back(name, make_param(std::move(shape), std::move(values), name));
    } else {
      throw ParseError(origin + ": unexpected token `" + tok + "`");
    }
  }
  if (!closed) throw ParseError(origin + ": truncated checkpoint (missing end marker)");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(in, path);
}

}  // namespace dysuse
