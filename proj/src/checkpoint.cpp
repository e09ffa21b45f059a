#include "prime/checkpoint.hpp"

#include <fstream>

#include "prime/binio.hpp"
#include "prime/errors.hpp"

namespace prime {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string partition_label(Partition p, int head) {
    switch (p) {
        case Partition::backbone: return "z";
        case Partition::shared: return "s";
        case Partition::head: return "task-" + std::to_string(head);
    }
    return "?";
}

void write_param_map(std::ostream& os, const std::map<std::string, Tensor>& m) {
    binio::write_pod<std::uint64_t>(os, m.size());
    for (const auto& [name, t] : m) {
        binio::write_string(os, name);
        binio::write_tensor(os, t);
    }
}

std::map<std::string, Tensor> read_param_map(std::istream& is, const char* what) {
    const auto n = binio::read_pod<std::uint64_t>(is, what);
    std::map<std::string, Tensor> m;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = binio::read_string(is, what);
        m.emplace(std::move(name), binio::read_tensor(is, what));
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const AdamState* optimizer) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open checkpoint for writing: " + path);

    os.write(kMagic, 4);
    binio::write_pod<std::uint32_t>(os, kVersion);

    binio::write_pod<std::uint64_t>(os, model.input_width);
    binio::write_pod<std::uint64_t>(os, model.encoder.token_dim);
    binio::write_pod<std::uint64_t>(os, model.encoder.heads);
    binio::write_pod<double>(os, model.dropout_rate);

    binio::write_pod<std::uint64_t>(os, model.hidden.size());
    for (const DenseLayer& l : model.hidden) {
        binio::write_pod<std::uint64_t>(os, l.in_dim());
        binio::write_pod<std::uint64_t>(os, l.out_dim());
    }
    binio::write_pod<std::uint64_t>(os, model.heads.size());
    for (const Head& h : model.heads) {
        binio::write_pod<std::uint64_t>(os, h.input_width);
        binio::write_pod<std::uint64_t>(os, h.class_ids.size());
        for (int c : h.class_ids) binio::write_pod<std::int32_t>(os, c);
    }

    // Parameter blobs with their partition labels.
    Model& mut = const_cast<Model&>(model);
    std::vector<ParamRef> refs = param_refs(mut);
    binio::write_pod<std::uint64_t>(os, refs.size());
    for (const ParamRef& r : refs) {
        binio::write_string(os, r.name);
        binio::write_string(os, partition_label(r.part, r.head));
        binio::write_tensor(os, *r.tensor);
    }

    binio::write_pod<std::uint64_t>(os, model.expansions.size());
    for (const ExpansionRecord& e : model.expansions) {
        binio::write_pod<std::uint64_t>(os, e.layer);
        binio::write_pod<std::uint64_t>(os, e.old_width);
        binio::write_pod<std::uint64_t>(os, e.new_width);
        binio::write_pod<double>(os, e.factor);
        binio::write_pod<double>(os, e.eps0);
    }
    write_param_map(os, model.fresh_masks);

    binio::write_pod<std::uint8_t>(os, optimizer ? 1 : 0);
    if (optimizer) {
        binio::write_pod<double>(os, optimizer->lr);
        binio::write_pod<double>(os, optimizer->beta1);
        binio::write_pod<double>(os, optimizer->beta2);
        binio::write_pod<double>(os, optimizer->eps);
        binio::write_pod<std::int64_t>(os, optimizer->step);
        binio::write_pod<double>(os, optimizer->plateau.factor);
        binio::write_pod<std::int32_t>(os, optimizer->plateau.patience);
        binio::write_pod<double>(os, optimizer->plateau.min_delta);
        binio::write_pod<double>(os, optimizer->best_loss);
        binio::write_pod<std::uint8_t>(os, optimizer->has_best ? 1 : 0);
        binio::write_pod<std::int32_t>(os, optimizer->bad_epochs);
        binio::write_pod<std::int32_t>(os, optimizer->reductions);
        write_param_map(os, optimizer->m);
        write_param_map(os, optimizer->v);
    }
    if (!os) throw Error("short write while saving checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kMagic, 4))
        throw UnsupportedFormatError("not a model checkpoint: " + path);
    const auto version = binio::read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw UnsupportedFormatError("checkpoint version " + std::to_string(version));

    Checkpoint out;
    Model& m = out.model;
    m.input_width = binio::read_pod<std::uint64_t>(is, "input width");
    const auto token_dim = binio::read_pod<std::uint64_t>(is, "token dim");
    const auto attn_heads = binio::read_pod<std::uint64_t>(is, "attention heads");
    m.dropout_rate = binio::read_pod<double>(is, "dropout");

    std::vector<std::size_t> hidden_dims;
    const auto n_hidden = binio::read_pod<std::uint64_t>(is, "hidden count");
    std::uint64_t in = m.input_width;
    for (std::uint64_t i = 0; i < n_hidden; ++i) {
        const auto lin = binio::read_pod<std::uint64_t>(is, "layer dims");
        const auto lout = binio::read_pod<std::uint64_t>(is, "layer dims");
        if (lin != in) throw ParseError(static_cast<std::size_t>(is.tellg()),
                                        "hidden layer dimensions do not chain");
        hidden_dims.push_back(lout);
        in = lout;
    }

    struct HeadSpec { std::uint64_t input_width; std::vector<int> classes; };
    std::vector<HeadSpec> head_specs;
    const auto n_heads = binio::read_pod<std::uint64_t>(is, "head count");
    for (std::uint64_t i = 0; i < n_heads; ++i) {
        HeadSpec hs;
        hs.input_width = binio::read_pod<std::uint64_t>(is, "head width");
        const auto nc = binio::read_pod<std::uint64_t>(is, "head classes");
        for (std::uint64_t c = 0; c < nc; ++c)
            hs.classes.push_back(binio::read_pod<std::int32_t>(is, "class id"));
        head_specs.push_back(std::move(hs));
    }

    // Rebuild the structure, then overwrite every parameter from the blobs.
    m = build_model(m.input_width, token_dim, attn_heads, hidden_dims, m.dropout_rate, 0);
    for (const HeadSpec& hs : head_specs) {
        Head h;
        h.input_width = hs.input_width;
        h.class_ids = hs.classes;
        h.out = DenseLayer{Tensor(hs.input_width, hs.classes.size(), 0.0),
                           Tensor(std::vector<std::size_t>{hs.classes.size()}, 0.0)};
        m.heads.push_back(std::move(h));
    }

    std::map<std::string, Tensor*> by_name;
    for (ParamRef& r : param_refs(m)) by_name.emplace(r.name, r.tensor);
    const auto n_params = binio::read_pod<std::uint64_t>(is, "parameter count");
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = binio::read_string(is, "parameter name");
        binio::read_string(is, "partition label");  // derivable from the name
        Tensor t = binio::read_tensor(is, "parameter blob");
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ParseError(static_cast<std::size_t>(is.tellg()), "unknown parameter " + name);
        if (!it->second->same_shape(t))
            throw ParseError(static_cast<std::size_t>(is.tellg()), "shape mismatch for " + name);
        *it->second = std::move(t);
    }

    const auto n_exp = binio::read_pod<std::uint64_t>(is, "expansion count");
    for (std::uint64_t i = 0; i < n_exp; ++i) {
        ExpansionRecord e;
        e.layer = binio::read_pod<std::uint64_t>(is, "expansion");
        e.old_width = binio::read_pod<std::uint64_t>(is, "expansion");
        e.new_width = binio::read_pod<std::uint64_t>(is, "expansion");
        e.factor = binio::read_pod<double>(is, "expansion");
        e.eps0 = binio::read_pod<double>(is, "expansion");
        m.expansions.push_back(e);
    }
    m.fresh_masks = read_param_map(is, "fresh masks");

    const auto has_opt = binio::read_pod<std::uint8_t>(is, "optimizer flag");
    if (has_opt) {
        AdamState st;
        st.lr = binio::read_pod<double>(is, "optimizer");
        st.beta1 = binio::read_pod<double>(is, "optimizer");
        st.beta2 = binio::read_pod<double>(is, "optimizer");
        st.eps = binio::read_pod<double>(is, "optimizer");
        st.step = binio::read_pod<std::int64_t>(is, "optimizer");
        st.plateau.factor = binio::read_pod<double>(is, "optimizer");
        st.plateau.patience = binio::read_pod<std::int32_t>(is, "optimizer");
        st.plateau.min_delta = binio::read_pod<double>(is, "optimizer");
        st.best_loss = binio::read_pod<double>(is, "optimizer");
        st.has_best = binio::read_pod<std::uint8_t>(is, "optimizer") != 0;
        st.bad_epochs = binio::read_pod<std::int32_t>(is, "optimizer");
        st.reductions = binio::read_pod<std::int32_t>(is, "optimizer");
        st.m = read_param_map(is, "optimizer moments");
        st.v = read_param_map(is, "optimizer moments");
        out.optimizer = std::move(st);
    }
    return out;
}

}  // namespace prime
