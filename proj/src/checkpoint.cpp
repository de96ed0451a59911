#include "loadpin/checkpoint.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "loadpin/binio.hpp"

namespace loadpin {

using nlohmann::json;

namespace {

json layer_json(const nn::LayerSpec& l) {
    return {{"kind", nn::to_string(l.kind)},     {"kernel_size", l.kernel_size}, {"out_channels", l.out_channels},
            {"stride", l.stride},                {"heads", l.heads},             {"activation", nn::to_string(l.activation)},
            {"spectral_norm", l.spectral_norm}};
}

nn::LayerSpec layer_from(const json& j) {
    nn::LayerSpec l;
    l.kind = nn::parse_layer_kind(j.at("kind").get<std::string>());
    l.kernel_size = j.at("kernel_size").get<std::size_t>();
    l.out_channels = j.at("out_channels").get<std::size_t>();
    l.stride = j.at("stride").get<std::size_t>();
    l.heads = j.at("heads").get<std::size_t>();
    l.activation = nn::parse_activation(j.at("activation").get<std::string>());
    l.spectral_norm = j.at("spectral_norm").get<bool>();
    return l;
}

json layers_json(const std::vector<nn::LayerSpec>& v) {
    json a = json::array();
    for (const auto& l : v) a.push_back(layer_json(l));
    return a;
}

std::vector<nn::LayerSpec> layers_from(const json& j) {
    std::vector<nn::LayerSpec> v;
    for (const auto& e : j) v.push_back(layer_from(e));
    return v;
}

json train_json(const TrainConfig& t) {
    return {{"lr_g", t.lr_g},
            {"lr_d", t.lr_d},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"lambda_adv", t.lambda_adv},
            {"lambda_feat", t.lambda_feat},
            {"batch_size", t.batch_size},
            {"max_iters", t.max_iters},
            {"margin_steps", t.margin_steps ? json(*t.margin_steps) : json(nullptr)},
            {"d_steps_per_g", t.d_steps_per_g},
            {"seed", t.seed},
            {"eval_every", t.eval_every},
            {"val_max", t.val_max},
            {"sn_iters", t.sn_iters}};
}

TrainConfig train_from(const json& j) {
    TrainConfig t;
    t.lr_g = j.at("lr_g").get<double>();
    t.lr_d = j.at("lr_d").get<double>();
    t.beta1 = j.at("beta1").get<double>();
    t.beta2 = j.at("beta2").get<double>();
    t.lambda_adv = j.at("lambda_adv").get<double>();
    t.lambda_feat = j.at("lambda_feat").get<double>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.max_iters = j.at("max_iters").get<std::size_t>();
    if (!j.at("margin_steps").is_null()) t.margin_steps = j.at("margin_steps").get<std::size_t>();
    t.d_steps_per_g = j.at("d_steps_per_g").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.eval_every = j.at("eval_every").get<std::size_t>();
    t.val_max = j.at("val_max").get<std::size_t>();
    t.sn_iters = j.at("sn_iters").get<int>();
    return t;
}

template <typename P>
void add_param(std::vector<NamedTensor>& out, const P& p) {
    const auto s = p.value.shape();
    out.push_back({p.name, {s[0], s[1], s[2]}, std::vector<float>(p.value.values().begin(), p.value.values().end())});
}

}  // namespace

Checkpoint Checkpoint::capture(const Generator<float>& g, const Discriminator<float>& d, const TrainConfig& tc,
                               const NormStats& st, int resolution, std::size_t iteration) {
    Checkpoint c;
    c.gen = g.config();
    c.disc = d.config();
    c.train = tc;
    c.stats = st;
    c.resolution = resolution;
    c.iteration = iteration;
    std::vector<const nn::Param<float>*> ps = g.params();
    const auto dp = d.params();
    ps.insert(ps.end(), dp.begin(), dp.end());
    for (const auto* p : ps) add_param(c.tensors, *p);
    for (const auto* p : ps)
        if (!p->sn_u.empty()) c.tensors.push_back({p->name + ".sn_u", {p->sn_u.size()}, p->sn_u});
    return c;
}

void Checkpoint::apply(Generator<float>& g, Discriminator<float>& d) const {
    std::map<std::string, const NamedTensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t;
    std::vector<nn::Param<float>*> ps = g.params();
    const auto dp = d.params();
    ps.insert(ps.end(), dp.begin(), dp.end());
    for (auto* p : ps) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint lacks tensor " + p->name);
        const auto s = p->value.shape();
        if (it->second->shape != std::vector<std::size_t>{s[0], s[1], s[2]})
            throw std::runtime_error("checkpoint tensor " + p->name + " has the wrong shape");
        std::copy(it->second->values.begin(), it->second->values.end(), p->value.data());
        auto u = by_name.find(p->name + ".sn_u");
        if (u != by_name.end()) p->sn_u = u->second->values;
    }
    d.refresh_spectral_norm(0);
}

Generator<float> Checkpoint::generator() const {
    Generator<float> g(gen);
    Discriminator<float> d(disc);
    apply(g, d);
    return g;
}

Discriminator<float> Checkpoint::discriminator() const {
    Generator<float> g(gen);
    Discriminator<float> d(disc);
    apply(g, d);
    return d;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json m;
    m["format"] = "loadpin-checkpoint";
    m["version"] = c.version;
    m["iteration"] = c.iteration;
    m["resolution"] = c.resolution;
    m["stats"] = {{"load_mean", c.stats.load_mean},
                  {"load_std", c.stats.load_std},
                  {"temp_mean", c.stats.temp_mean},
                  {"temp_std", c.stats.temp_std}};
    m["generator"] = {{"coarse", layers_json(c.gen.coarse)},
                      {"fine", layers_json(c.gen.fine)},
                      {"input_channels", c.gen.input_channels},
                      {"window", c.gen.window}};
    m["discriminator"] = {{"layers", layers_json(c.disc.layers)}, {"input_channels", c.disc.input_channels}};
    m["train"] = train_json(c.train);
    json ts = json::array();
    std::size_t offset = 0;
    for (const auto& t : c.tensors) {
        ts.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "float32"}, {"offset", offset}});
        offset += t.values.size() * 4;
    }
    m["tensors"] = std::move(ts);
    {
        std::ofstream out(dir / "params.bin", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / "params.bin").string());
        for (const auto& t : c.tensors) write_le_floats(out, t.values);
    }
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    mf << m.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("no checkpoint manifest in " + dir.string());
    json m;
    try {
        m = json::parse(mf);
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (m.value("format", "") != "loadpin-checkpoint") throw std::runtime_error("not a checkpoint manifest");
    Checkpoint c;
    try {
        c.version = m.at("version").get<int>();
        if (c.version != Checkpoint::kVersion)
            throw std::runtime_error("unsupported checkpoint version " + std::to_string(c.version));
        c.iteration = m.at("iteration").get<std::size_t>();
        c.resolution = m.at("resolution").get<int>();
        const auto& st = m.at("stats");
        c.stats = {st.at("load_mean").get<double>(), st.at("load_std").get<double>(), st.at("temp_mean").get<double>(),
                   st.at("temp_std").get<double>()};
        c.gen.coarse = layers_from(m.at("generator").at("coarse"));
        c.gen.fine = layers_from(m.at("generator").at("fine"));
        c.gen.input_channels = m.at("generator").at("input_channels").get<std::size_t>();
        c.gen.window = m.at("generator").at("window").get<std::size_t>();
        c.disc.layers = layers_from(m.at("discriminator").at("layers"));
        c.disc.input_channels = m.at("discriminator").at("input_channels").get<std::size_t>();
        c.train = train_from(m.at("train"));
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint manifest field error: " + std::string(e.what()));
    }
    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) throw std::runtime_error("no params.bin in " + dir.string());
    std::size_t expected = 0;
    for (const auto& t : m.at("tensors")) {
        NamedTensor nt;
        nt.name = t.at("name").get<std::string>();
        nt.shape = t.at("shape").get<std::vector<std::size_t>>();
        if (t.at("dtype").get<std::string>() != "float32") throw std::runtime_error("tensor " + nt.name + ": dtype must be float32");
        if (t.at("offset").get<std::size_t>() != expected) throw std::runtime_error("tensor " + nt.name + ": bad offset");
        std::size_t n = 1;
        for (auto s : nt.shape) n *= s;
        nt.values = read_le_floats(in, n);
        expected += n * 4;
        c.tensors.push_back(std::move(nt));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("params.bin has trailing bytes");
    return c;
}

}  // namespace loadpin
