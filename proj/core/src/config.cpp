#include "ctl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace ctl {
namespace {

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};
using FieldTable = std::map<std::string, Field>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::string from_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Field size_field(std::size_t& ref) {
  return {[&ref](const std::string& v) { ref = static_cast<std::size_t>(to_u64(v)); },
          [&ref] { return std::to_string(ref); }};
}
Field u64_field(std::uint64_t& ref) {
  return {[&ref](const std::string& v) { ref = to_u64(v); }, [&ref] { return std::to_string(ref); }};
}
Field double_field(double& ref) {
  return {[&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return from_double(ref); }};
}
Field bool_field(bool& ref) {
  return {[&ref](const std::string& v) { ref = to_bool(v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
}

template <typename E>
Field enum_field(E& ref, std::vector<std::pair<std::string, E>> names) {
  return {[&ref, names](const std::string& v) {
            for (const auto& [n, e] : names)
              if (n == v) {
                ref = e;
                return;
              }
            std::string options;
            for (const auto& [n, e] : names) options += (options.empty() ? "" : "|") + n;
            throw ConfigError("expected one of " + options + ", got '" + v + "'");
          },
          [&ref, names] {
            for (const auto& [n, e] : names)
              if (e == ref) return n;
            return std::string("?");
          }};
}

void add_synth_fields(FieldTable& t, SynthSpec& s, const std::string& prefix, bool with_dims) {
  t[prefix + "identities"] = size_field(s.identities);
  t[prefix + "test_identities"] = size_field(s.test_identities);
  t[prefix + "cameras"] = size_field(s.cameras);
  t[prefix + "clips_per_camera"] = size_field(s.clips_per_camera);
  t[prefix + "height"] = size_field(s.height);
  t[prefix + "width"] = size_field(s.width);
  t[prefix + "noise"] = double_field(s.noise);
  t[prefix + "occlusion"] = double_field(s.occlusion);
  t[prefix + "jitter"] = double_field(s.jitter);
  t[prefix + "distortion"] = double_field(s.distortion);
  t[prefix + "seed"] = u64_field(s.seed);
  if (with_dims) {
    t[prefix + "frames"] = size_field(s.frames);
    t[prefix + "channels"] = size_field(s.channels);
  }
}

FieldTable run_fields(RunConfig& c) {
  FieldTable t;
  auto& m = c.model;
  t["frames"] = size_field(m.frames);
  t["channels"] = size_field(m.channels);
  t["tau"] = size_field(m.tau);
  t["layers"] = size_field(m.layers);
  t["alpha"] = double_field(m.alpha);
  t["embed_dim"] = size_field(m.embed_dim);
  t["cs_depth"] = size_field(m.cs_depth);
  t["cs_scales"] = enum_field(m.cs_sources, std::vector<std::pair<std::string, CrossScaleSources>>{
                                                 {"s3", CrossScaleSources::kS3},
                                                 {"s3s1", CrossScaleSources::kS3S1},
                                                 {"s3s1s2", CrossScaleSources::kS3S1S2}});
  t["use_Ap"] = bool_field(m.use_physical);
  t["use_Am"] = bool_field(m.use_mask);
  t["use_Ac"] = bool_field(m.use_context);
  t["context_relu"] = bool_field(m.context_relu);
  t["block_context"] = enum_field(m.block_context, std::vector<std::pair<std::string, BlockContext>>{
                                                       {"window", BlockContext::kWindow}, {"clip", BlockContext::kClip}});
  t["degree_eps"] = double_field(m.degree_eps);
  t["shared_classifier"] = bool_field(m.shared_classifier);
  t["num_classes"] = size_field(m.num_classes);
  t["s2_groups"] = {[&m](const std::string& v) { m.grouping.s2 = parse_groups(v); },
                    [&m] { return format_groups(m.grouping.s2); }};
  t["s3_groups"] = {[&m](const std::string& v) { m.grouping.s3 = parse_groups(v); },
                    [&m] { return format_groups(m.grouping.s3); }};
  t["skeleton_edges"] = {[&m](const std::string& v) { m.skeleton = parse_edges(v); },
                         [&m] { return format_edges(m.skeleton); }};

  t["lambda_tri"] = double_field(c.loss.triplet);
  t["lambda_ide"] = double_field(c.loss.identity);
  t["lambda_div"] = double_field(c.loss.diversity);
  t["margin"] = double_field(c.loss.margin);
  t["label_smoothing"] = double_field(c.loss.smoothing);
  t["similarity"] = enum_field(c.similarity, std::vector<std::pair<std::string, Similarity>>{
                                                 {"cosine", Similarity::kCosine}, {"euclidean", Similarity::kEuclidean}});

  auto& tr = c.train;
  t["lr"] = double_field(tr.lr);
  t["weight_decay"] = double_field(tr.weight_decay);
  t["beta1"] = double_field(tr.beta1);
  t["beta2"] = double_field(tr.beta2);
  t["adam_eps"] = double_field(tr.adam_eps);
  t["steps"] = size_field(tr.steps);
  t["ids_per_batch"] = size_field(tr.ids_per_batch);
  t["clips_per_id"] = size_field(tr.clips_per_id);
  t["lr_decay_every"] = size_field(tr.lr_decay_every);
  t["lr_decay_factor"] = double_field(tr.lr_decay_factor);
  t["seed"] = u64_field(tr.seed);
  t["log_every"] = size_field(tr.log_every);

  add_synth_fields(t, c.data, "data.", false);
  return t;
}

void apply(FieldTable& table, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
}

std::string render(const FieldTable& table) {
  std::string out;
  for (const auto& [key, field] : table) out += key + " = " + field.get() + "\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string format_groups(const NodeGroups& groups) {
  std::string out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) out += "; ";
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (i) out += ",";
      out += std::to_string(groups[g][i]);
    }
  }
  return out;
}

NodeGroups parse_groups(const std::string& text) {
  NodeGroups groups;
  std::istringstream in(text);
  std::string group;
  while (std::getline(in, group, ';')) {
    std::vector<std::size_t> members;
    std::istringstream gs(group);
    std::string item;
    while (std::getline(gs, item, ',')) {
      item = trim(item);
      if (!item.empty()) members.push_back(static_cast<std::size_t>(to_u64(item)));
    }
    groups.push_back(std::move(members));
  }
  return groups;
}

std::string format_edges(const EdgeList& edges) {
  std::string out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(edges[i].first) + "-" + std::to_string(edges[i].second);
  }
  return out;
}

EdgeList parse_edges(const std::string& text) {
  EdgeList edges;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw ConfigError("edge '" + item + "' is not of the form a-b");
    edges.emplace_back(static_cast<std::size_t>(to_u64(trim(item.substr(0, dash)))),
                       static_cast<std::size_t>(to_u64(trim(item.substr(dash + 1)))));
  }
  return edges;
}

void ModelConfig::validate() const {
  if (frames == 0 || channels == 0) throw ConfigError("frames and channels must be positive");
  if (tau == 0 || tau % 2 == 0) throw ConfigError("tau must be odd, got " + std::to_string(tau));
  if (layers == 0) throw ConfigError("layers must be at least 1");
  if (cs_depth == 0) throw ConfigError("cs_depth must be at least 1");
  if (degree_eps <= 0) throw ConfigError("degree_eps must be positive");
  grouping.validate();
  for (const auto& [u, v] : skeleton) {
    if (u >= kKeypoints || v >= kKeypoints || u == v) {
      throw ConfigError("invalid skeleton edge " + std::to_string(u) + "-" + std::to_string(v));
    }
  }
  if (channels % grouping.s3.size() != 0) {
    throw ConfigError("channels (" + std::to_string(channels) + ") must be divisible by the " +
                      std::to_string(grouping.s3.size()) + " s3 parts");
  }
}

void SynthSpec::validate() const {
  if (identities == 0 || cameras == 0 || clips_per_camera == 0 || frames == 0 || height == 0 || width == 0 ||
      channels == 0) {
    throw ConfigError("synthetic data counts and extents must be positive");
  }
  if (noise < 0 || jitter < 0 || distortion < 0) throw ConfigError("noise, jitter and distortion must be >= 0");
  if (occlusion < 0 || occlusion > 1) throw ConfigError("occlusion must be a probability");
}

void RunConfig::validate() const {
  model.validate();
  if (loss.triplet < 0 || loss.identity < 0 || loss.diversity < 0) throw ConfigError("lambdas must be >= 0");
  if (loss.smoothing < 0 || loss.smoothing >= 1) throw ConfigError("label_smoothing must be in [0, 1)");
  if (train.ids_per_batch < 2 || train.clips_per_id < 2) {
    throw ConfigError("batches need at least 2 identities with 2 clips each");
  }
  if (train.lr < 0) throw ConfigError("lr must be >= 0");
  auto d = data;
  d.frames = model.frames;
  d.channels = model.channels;
  d.validate();
}

std::string RunConfig::canonical() const {
  auto copy = *this;
  return render(run_fields(copy));
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  auto table = run_fields(c);
  apply(table, text);
  c.data.frames = c.model.frames;
  c.data.channels = c.model.channels;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_file(path)); }

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec s;
  FieldTable table;
  add_synth_fields(table, s, "", true);
  apply(table, text);
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) { return parse_synth_spec(read_file(path)); }

std::string canonical_synth_spec(const SynthSpec& spec) {
  auto copy = spec;
  FieldTable table;
  add_synth_fields(table, copy, "", true);
  return render(table);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ctl
