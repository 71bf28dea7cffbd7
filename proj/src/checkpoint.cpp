//
// Copyright 2026 The ktlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "kt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "kt/errors.hpp"

namespace kt::model {

namespace {
constexpr char kMagic[8] = {'k', 't', 'l', 'a', 'b', 'c', 'k', '1'};

nlohmann::json idmap_json(const data::IdMap& map) {
  nlohmann::json names = nlohmann::json::array();
  for (std::int32_t i = 0; i < map.size(); ++i) names.push_back(map.raw(i));
  return names;
}

data::IdMap idmap_from_json(const nlohmann::json& names) {
  data::IdMap map;
  for (const auto& name : names) map.intern(name.get<std::string>());
  return map;
}
}  // namespace

void save_checkpoint(const std::string& path, const SequenceModel& model,
                     const data::IdMap& question_ids, const data::IdMap& kc_ids) {
  const nn::ParamStore& params = model.params();
  nlohmann::json header;
  header["config"] = model.config().to_json();
  header["questions"] = idmap_json(question_ids);
  header["kcs"] = idmap_json(kc_ids);
  nlohmann::json tensors = nlohmann::json::array();
  for (const std::string& name : params.names()) {
    const Matd& value = params.value(name);
    tensors.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}});
  }
  header["tensors"] = tensors;
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error::io("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  std::uint64_t len = header_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const std::string& name : params.names()) {
    const Matd& value = params.value(name);
    out.write(reinterpret_cast<const char*>(value.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(value.size())));
  }
  if (!out) throw Error::io("short write to checkpoint '" + path + "'");
}

std::unique_ptr<SequenceModel> load_checkpoint(const std::string& path, data::IdMap* question_ids,
                                               data::IdMap* kc_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error::data("'" + path + "' is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1u << 30)) throw Error::data("corrupt checkpoint header length");
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error::data("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("unparseable checkpoint header: " + std::string(e.what()));
  }
  ModelConfig config = ModelConfig::from_json(header.at("config"));
  data::IdMap questions = idmap_from_json(header.at("questions"));
  data::IdMap kcs = idmap_from_json(header.at("kcs"));

  auto model = make_model(config, questions.size(), kcs.size());
  nn::ParamStore& params = model->params();
  std::size_t seen = 0;
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    if (!params.has(name))
      throw Error::data("checkpoint tensor '" + name + "' is not part of this model");
    Matd& value = params.value(name);
    if (value.rows() != rows || value.cols() != cols)
      throw Error::data("checkpoint tensor '" + name + "' has the wrong shape");
    in.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(value.size())));
    if (!in) throw Error::data("truncated checkpoint payload at '" + name + "'");
    ++seen;
  }
  if (seen != params.names().size())
    throw Error::data("checkpoint is missing tensors for this model");
  if (question_ids) *question_ids = std::move(questions);
  if (kc_ids) *kc_ids = std::move(kcs);
  return model;
}

}  // namespace kt::model
