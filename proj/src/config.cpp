#include "lvo/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "binary_io.hpp"
#include "lvo/error.hpp"

namespace lvo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::string t = s;
  for (char& c : t) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string item; in >> item;) out.push_back(item);
  return out;
}

template <class T>
T parse_number(const std::string& value, const std::string& where) {
  T out{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError(where + ": expected a number, got \"" + value + "\"");
  }
  return out;
}

bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError(where + ": expected true/false, got \"" + value + "\"");
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    if (section.empty()) throw ParseError(where + ": key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (doc[section].contains(key)) throw ParseError(where + ": duplicate key " + key);
    doc[section][key] = trim(line.substr(eq + 1));
  }
  return doc;
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& source) {
  const IniDocument doc = parse_ini(text, source);
  PipelineConfig cfg;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"dataset",
       {{"root", [&](auto& v, auto&) { cfg.dataset_root = path(v); }},
        {"sequences", [&](auto& v, auto&) { cfg.sequences = split_list(v); }},
        {"train_sequences", [&](auto& v, auto&) { cfg.train_sequences = split_list(v); }},
        {"frame_period",
         [&](auto& v, auto& w) { cfg.eval.frame_period = parse_number<double>(v, w); }}}},
      {"output", {{"dir", [&](auto& v, auto&) { cfg.output_dir = path(v); }}}},
      {"model", {{"checkpoint", [&](auto& v, auto&) { cfg.checkpoint = path(v); }}}},
      {"association",
       {{"max_inverse_depth",
         [&](auto& v, auto& w) { cfg.association.max_inverse_depth = parse_number<float>(v, w); }},
        {"downsample",
         [&](auto& v, auto& w) { cfg.association.downsample = parse_number<int>(v, w); }},
        {"metric_depth",
         [&](auto& v, auto& w) { cfg.association.metric_depth = parse_bool(v, w); }}}},
      {"lvo",
       {{"input_width", [&](auto& v, auto& w) { cfg.lvo.input_width = parse_number<int>(v, w); }},
        {"input_height",
         [&](auto& v, auto& w) { cfg.lvo.input_height = parse_number<int>(v, w); }},
        {"stream_channels",
         [&](auto& v, auto& w) {
           cfg.lvo.stream_channels.clear();
           for (const auto& s : split_list(v)) {
             cfg.lvo.stream_channels.push_back(parse_number<int>(s, w));
           }
         }},
        {"squeeze_divisor",
         [&](auto& v, auto& w) { cfg.lvo.squeeze_divisor = parse_number<int>(v, w); }},
        {"fc_hidden", [&](auto& v, auto& w) { cfg.lvo.fc_hidden = parse_number<int>(v, w); }}}},
      {"train",
       {{"batch_size", [&](auto& v, auto& w) { cfg.train.batch_size = parse_number<int>(v, w); }},
        {"learning_rate",
         [&](auto& v, auto& w) { cfg.train.learning_rate = parse_number<double>(v, w); }},
        {"lr_decay", [&](auto& v, auto& w) { cfg.train.lr_decay = parse_number<double>(v, w); }},
        {"epochs", [&](auto& v, auto& w) { cfg.train.epochs = parse_number<int>(v, w); }},
        {"beta1", [&](auto& v, auto& w) { cfg.train.beta1 = parse_number<double>(v, w); }},
        {"beta2", [&](auto& v, auto& w) { cfg.train.beta2 = parse_number<double>(v, w); }},
        {"epsilon", [&](auto& v, auto& w) { cfg.train.epsilon = parse_number<double>(v, w); }},
        {"seed", [&](auto& v, auto& w) { cfg.train.seed = parse_number<std::uint64_t>(v, w); }},
        {"mirror_augment",
         [&](auto& v, auto& w) { cfg.train.mirror_augment = parse_bool(v, w); }}}},
      {"loss",
       {{"lambda1", [&](auto& v, auto& w) { cfg.loss.lambda1 = parse_number<double>(v, w); }},
        {"lambda2", [&](auto& v, auto& w) { cfg.loss.lambda2 = parse_number<double>(v, w); }},
        {"lambda3", [&](auto& v, auto& w) { cfg.loss.lambda3 = parse_number<double>(v, w); }}}},
      {"predict",
       {{"n_samples", [&](auto& v, auto& w) { cfg.predict.n_samples = parse_number<int>(v, w); }},
        {"seed",
         [&](auto& v, auto& w) { cfg.predict.seed = parse_number<std::uint64_t>(v, w); }},
        {"deterministic",
         [&](auto& v, auto& w) { cfg.predict.deterministic = parse_bool(v, w); }}}},
      {"octree",
       {{"resolution",
         [&](auto& v, auto& w) { cfg.octree.resolution = parse_number<double>(v, w); }},
        {"prob_hit", [&](auto& v, auto& w) { cfg.octree.prob_hit = parse_number<double>(v, w); }},
        {"prob_miss",
         [&](auto& v, auto& w) { cfg.octree.prob_miss = parse_number<double>(v, w); }},
        {"prior", [&](auto& v, auto& w) { cfg.octree.prior = parse_number<double>(v, w); }},
        {"occupancy_threshold",
         [&](auto& v, auto& w) { cfg.octree.occupancy_threshold = parse_number<double>(v, w); }},
        {"clamp_min",
         [&](auto& v, auto& w) { cfg.octree.clamp_min = parse_number<double>(v, w); }},
        {"clamp_max",
         [&](auto& v, auto& w) { cfg.octree.clamp_max = parse_number<double>(v, w); }},
        {"max_range",
         [&](auto& v, auto& w) { cfg.octree.max_range = parse_number<double>(v, w); }}}},
      {"map",
       {{"pixel_stride",
         [&](auto& v, auto& w) { cfg.map.pixel_stride = parse_number<int>(v, w); }}}},
      {"eval",
       {{"speed_bin_width",
         [&](auto& v, auto& w) { cfg.eval.speed_bin_width = parse_number<double>(v, w); }},
        {"step", [&](auto& v, auto& w) { cfg.eval.step = parse_number<int>(v, w); }},
        {"lengths",
         [&](auto& v, auto& w) {
           cfg.eval.lengths.clear();
           for (const auto& s : split_list(v)) cfg.eval.lengths.push_back(parse_number<double>(s, w));
         }}}},
  };

  for (const auto& [section, entries] : doc) {
    const auto sec = schema.find(section);
    if (sec == schema.end()) throw ParseError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : entries) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) {
        throw ParseError(source + ": unknown key " + section + "." + key);
      }
      setter->second(value, source + ": " + section + "." + key);
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path), path.parent_path(), path.string());
}

void PipelineConfig::validate() const {
  try {
    lvo.validate();
    train.validate();
    loss.validate();
    predict.validate();
    octree.validate();
  } catch (const InvariantError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (association.downsample < 1) throw ParseError("config: association.downsample must be >= 1");
  if (!(association.max_inverse_depth > 0.0f)) {
    throw ParseError("config: association.max_inverse_depth must be positive");
  }
  if (map.pixel_stride < 1) throw ParseError("config: map.pixel_stride must be >= 1");
  bool lengths_ok = !eval.lengths.empty();
  for (double l : eval.lengths) lengths_ok = lengths_ok && l > 0.0;
  if (!(eval.frame_period > 0.0) || !(eval.speed_bin_width > 0.0) || eval.step < 1 ||
      !lengths_ok) {
    throw ParseError("config: invalid [eval] settings");
  }
}

std::string PipelineConfig::canonical_text() const {
  std::string channels;
  for (int c : lvo.stream_channels) channels += (channels.empty() ? "" : ",") + std::to_string(c);
  std::string lengths;
  for (double l : eval.lengths) lengths += (lengths.empty() ? "" : ",") + fmt(l);
  std::ostringstream os;
  os << "dataset.root=" << dataset_root.generic_string() << "\n"
     << "dataset.sequences=" << join(sequences) << "\n"
     << "dataset.train_sequences=" << join(train_sequences) << "\n"
     << "dataset.frame_period=" << fmt(eval.frame_period) << "\n"
     << "output.dir=" << output_dir.generic_string() << "\n"
     << "model.checkpoint=" << (checkpoint ? checkpoint->generic_string() : "") << "\n"
     << "association.max_inverse_depth=" << fmt(association.max_inverse_depth) << "\n"
     << "association.downsample=" << association.downsample << "\n"
     << "association.metric_depth=" << association.metric_depth << "\n"
     << "lvo.input_width=" << lvo.input_width << "\n"
     << "lvo.input_height=" << lvo.input_height << "\n"
     << "lvo.stream_channels=" << channels << "\n"
     << "lvo.squeeze_divisor=" << lvo.squeeze_divisor << "\n"
     << "lvo.fc_hidden=" << lvo.fc_hidden << "\n"
     << "train.batch_size=" << train.batch_size << "\n"
     << "train.learning_rate=" << fmt(train.learning_rate) << "\n"
     << "train.lr_decay=" << fmt(train.lr_decay) << "\n"
     << "train.epochs=" << train.epochs << "\n"
     << "train.beta1=" << fmt(train.beta1) << "\n"
     << "train.beta2=" << fmt(train.beta2) << "\n"
     << "train.epsilon=" << fmt(train.epsilon) << "\n"
     << "train.seed=" << train.seed << "\n"
     << "train.mirror_augment=" << train.mirror_augment << "\n"
     << "loss.lambda1=" << fmt(loss.lambda1) << "\n"
     << "loss.lambda2=" << fmt(loss.lambda2) << "\n"
     << "loss.lambda3=" << fmt(loss.lambda3) << "\n"
     << "predict.n_samples=" << predict.n_samples << "\n"
     << "predict.seed=" << predict.seed << "\n"
     << "predict.deterministic=" << predict.deterministic << "\n"
     << "octree.resolution=" << fmt(octree.resolution) << "\n"
     << "octree.prob_hit=" << fmt(octree.prob_hit) << "\n"
     << "octree.prob_miss=" << fmt(octree.prob_miss) << "\n"
     << "octree.prior=" << fmt(octree.prior) << "\n"
     << "octree.occupancy_threshold=" << fmt(octree.occupancy_threshold) << "\n"
     << "octree.clamp_min=" << fmt(octree.clamp_min) << "\n"
     << "octree.clamp_max=" << fmt(octree.clamp_max) << "\n"
     << "octree.max_range=" << fmt(octree.max_range) << "\n"
     << "map.pixel_stride=" << map.pixel_stride << "\n"
     << "eval.speed_bin_width=" << fmt(eval.speed_bin_width) << "\n"
     << "eval.step=" << eval.step << "\n"
     << "eval.lengths=" << lengths << "\n";
  return os.str();
}

}  // namespace lvo
