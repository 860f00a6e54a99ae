#include "hoi/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace hoi {

using nlohmann::json;

std::string model_config_to_json(const ModelConfig& c) {
    json heads = json::array();
    for (const auto& h : c.heads_spec)
        heads.push_back({{"name", h.name},
                         {"classes", h.classes},
                         {"activation", h.activation == HeadActivation::kSoftmax ? "softmax" : "sigmoid"}});
    const json j{{"visual_dim", c.visual_dim},
                 {"semantic_dim", c.semantic_dim},
                 {"d_human", c.d_human},
                 {"d_object", c.d_object},
                 {"d_rel", c.d_rel},
                 {"d_mask", c.d_mask},
                 {"d_gaze", c.d_gaze},
                 {"conv_c1", c.conv_c1},
                 {"conv_c2", c.conv_c2},
                 {"d_ffn", c.d_ffn},
                 {"heads", c.heads},
                 {"n_sp", c.n_sp},
                 {"n_tmp", c.n_tmp},
                 {"window_length", c.window_length},
                 {"dropout", c.dropout},
                 {"gaze_mode", to_string(c.gaze_mode)},
                 {"pe_mode", to_string(c.pe_mode)},
                 {"window_mode", to_string(c.window_mode)},
                 {"global_token", c.global_token},
                 {"human_pair_object_projection", c.human_pair_object_projection},
                 {"heads_spec", heads}};
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model config: ") + e.what());
    }
    ModelConfig c;
    c.visual_dim = j.at("visual_dim").get<int>();
    c.semantic_dim = j.at("semantic_dim").get<int>();
    c.d_human = j.at("d_human").get<int>();
    c.d_object = j.at("d_object").get<int>();
    c.d_rel = j.at("d_rel").get<int>();
    c.d_mask = j.at("d_mask").get<int>();
    c.d_gaze = j.at("d_gaze").get<int>();
    c.conv_c1 = j.at("conv_c1").get<int>();
    c.conv_c2 = j.at("conv_c2").get<int>();
    c.d_ffn = j.at("d_ffn").get<int>();
    c.heads = j.at("heads").get<int>();
    c.n_sp = j.at("n_sp").get<int>();
    c.n_tmp = j.at("n_tmp").get<int>();
    c.window_length = j.at("window_length").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.gaze_mode = gaze_mode_from_string(j.at("gaze_mode").get<std::string>());
    c.pe_mode = pe_mode_from_string(j.at("pe_mode").get<std::string>());
    c.window_mode = window_mode_from_string(j.at("window_mode").get<std::string>());
    c.global_token = j.at("global_token").get<bool>();
    c.human_pair_object_projection = j.at("human_pair_object_projection").get<bool>();
    c.heads_spec.clear();
    for (const auto& h : j.at("heads_spec")) {
        PredictionHeadSpec spec;
        spec.name = h.at("name").get<std::string>();
        spec.classes = h.at("classes").get<int>();
        spec.activation = h.at("activation").get<std::string>() == "softmax"
                              ? HeadActivation::kSoftmax
                              : HeadActivation::kSigmoid;
        c.heads_spec.push_back(std::move(spec));
    }
    return c;
}

namespace {

constexpr char kMagic[8] = {'H', 'O', 'I', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointMismatch("truncated checkpoint");
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    const auto len = read_pod<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw CheckpointMismatch("truncated checkpoint string");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const HoiModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SchemaError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_string(out, model_config_to_json(model.config()));
    const auto& params = model.parameters();
    write_pod<uint64_t>(out, params.size());
    for (const auto& [name, var] : params) {
        write_string(out, name);
        write_pod<uint32_t>(out, static_cast<uint32_t>(var->value.rank()));
        for (int d : var->value.shape()) write_pod<int64_t>(out, d);
        std::vector<float> payload(static_cast<size_t>(var->value.size()));
        for (int i = 0; i < var->value.size(); ++i)
            payload[static_cast<size_t>(i)] = static_cast<float>(var->value.flat(i));
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
    }
    if (!out) throw SchemaError("short write to " + path);
}

std::unique_ptr<HoiModel> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointMismatch(path + ": bad magic");
    const ModelConfig config = model_config_from_json(read_string(in));
    auto model = std::make_unique<HoiModel>(config, /*init_seed=*/0);

    const auto count = read_pod<uint64_t>(in);
    const auto& params = model->parameters();
    if (count != params.size())
        throw CheckpointMismatch("checkpoint has " + std::to_string(count) + " tensors, model has " +
                                 std::to_string(params.size()));
    for (uint64_t i = 0; i < count; ++i) {
        const std::string name = read_string(in);
        if (name != params[i].first)
            throw CheckpointMismatch("tensor " + std::to_string(i) + " is '" + name +
                                     "', expected '" + params[i].first + "'");
        const auto rank = read_pod<uint32_t>(in);
        std::vector<int> shape;
        for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(read_pod<int64_t>(in)));
        if (shape != params[i].second->value.shape())
            throw CheckpointMismatch("tensor '" + name + "' shape mismatch");
        std::vector<float> payload(static_cast<size_t>(params[i].second->value.size()));
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!in) throw CheckpointMismatch("truncated payload for '" + name + "'");
        for (size_t j = 0; j < payload.size(); ++j)
            params[i].second->value.flat(static_cast<int>(j)) = static_cast<double>(payload[j]);
    }
    return model;
}

}  // namespace hoi
