#include "clap/corpus/io.hpp"

#include <fstream>

#include "json.hpp"

namespace clap::corpus {

using nlohmann::json;

namespace {

json video_to_json(const UntrimmedVideo& v) {
  json segments = json::array();
  for (const Segment& s : v.segments) {
    json seg{{"t_start", s.t_start}, {"t_end", s.t_end}};
    if (s.class_id)
      seg["class_id"] = *s.class_id;
    else
      seg["class_id"] = nullptr;
    segments.push_back(std::move(seg));
  }
  json captions = json::array();
  for (const TimedCaption& c : v.captions)
    captions.push_back(
        {{"t_start", c.t_start}, {"t_end", c.t_end}, {"text", c.text}});
  return json{{"id", v.id},
              {"duration_s", v.duration_s},
              {"primary_class", v.primary_class},
              {"clip_features", v.clip_features},
              {"segments", std::move(segments)},
              {"captions", std::move(captions)}};
}

UntrimmedVideo video_from_json(const json& j) {
  UntrimmedVideo v;
  v.id = j.at("id").get<std::string>();
  v.duration_s = j.at("duration_s").get<int>();
  v.primary_class = j.at("primary_class").get<int>();
  v.clip_features = j.at("clip_features").get<std::vector<std::vector<double>>>();
  for (const json& seg : j.at("segments")) {
    Segment s;
    s.t_start = seg.at("t_start").get<double>();
    s.t_end = seg.at("t_end").get<double>();
    if (!seg.at("class_id").is_null()) s.class_id = seg.at("class_id").get<int>();
    v.segments.push_back(s);
  }
  for (const json& cap : j.at("captions")) {
    v.captions.push_back({cap.at("t_start").get<double>(),
                          cap.at("t_end").get<double>(),
                          cap.at("text").get<std::string>()});
  }
  return v;
}

}  // namespace

void save_corpus(const std::vector<UntrimmedVideo>& videos,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open corpus file for writing: " + path);
  for (const UntrimmedVideo& v : videos) out << video_to_json(v) << '\n';
  if (!out) throw DataError("failed writing corpus file: " + path);
}

std::vector<UntrimmedVideo> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: corpus file " + path);
  std::vector<UntrimmedVideo> videos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      videos.push_back(video_from_json(j));
    } catch (const json::exception& e) {
      throw DataError("corpus parse error at line " +
                      std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_video(videos.back());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": " + e.what());
    }
  }
  return videos;
}

void save_class_vocab(const std::vector<std::string>& names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open vocab file for writing: " + path);
  out << json(names).dump(2) << '\n';
}

std::vector<std::string> load_class_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing input artifact: class vocab " + path);
  try {
    json j = json::parse(in);
    return j.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("class vocab parse error: " + std::string(e.what()));
  }
}

}  // namespace clap::corpus
