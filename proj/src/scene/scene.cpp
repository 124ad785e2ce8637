#include "flowgen/scene/scene.hpp"

#include "flowgen/error.hpp"
#include "flowgen/flow/io.hpp"
#include "flowgen/sampler/rng.hpp"
#include "flowgen/scene/json_locator.hpp"
#include "flowgen/scene/manifest.hpp"

#include <json.hpp>

#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <set>

namespace flowgen::scene {

namespace {

using nlohmann::json;

class Parser {
public:
    Parser(std::string_view text, std::filesystem::path base_dir, std::string origin)
        : text_(text), base_dir_(std::move(base_dir)), origin_(std::move(origin)) {}

    SceneSpec parse();

private:
    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
        const TextPosition pos = locator_ ? locator_->locate(pointer) : TextPosition{};
        throw ValidationError(origin_ + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " +
                              (pointer.empty() ? "/" : pointer) + ": " + message);
    }

    static std::string child(const std::string& pointer, const std::string& key) { return pointer + "/" + key; }

    const json& object_at(const json& j, const std::string& ptr) const {
        if (!j.is_object()) fail(ptr, "expected an object");
        return j;
    }

    void allow_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) const {
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, _] : obj.items()) {
            if (!allowed.count(key)) fail(child(ptr, key), "unknown key '" + key + "'");
        }
    }

    const json* find(const json& obj, const char* key) const {
        const auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    const json& require(const json& obj, const std::string& ptr, const char* key) const {
        const json* v = find(obj, key);
        if (v == nullptr) fail(ptr, std::string("missing required key '") + key + "'");
        return *v;
    }

    double number(const json& v, const std::string& ptr) const {
        if (!v.is_number()) fail(ptr, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(ptr, "expected a finite number");
        return d;
    }

    long long integer(const json& v, const std::string& ptr) const {
        if (!v.is_number_integer()) fail(ptr, "expected an integer");
        return v.get<long long>();
    }

    int int_in(const json& v, const std::string& ptr, long long lo, long long hi) const {
        const long long i = integer(v, ptr);
        if (i < lo || i > hi) {
            fail(ptr, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        return static_cast<int>(i);
    }

    double number_or(const json& obj, const std::string& ptr, const char* key, double fallback) const {
        const json* v = find(obj, key);
        return v ? number(*v, child(ptr, key)) : fallback;
    }

    double positive_or(const json& obj, const std::string& ptr, const char* key, double fallback) const {
        const double d = number_or(obj, ptr, key, fallback);
        if (!(d > 0.0)) fail(child(ptr, key), "expected a positive number");
        return d;
    }

    double non_negative_or(const json& obj, const std::string& ptr, const char* key, double fallback) const {
        const double d = number_or(obj, ptr, key, fallback);
        if (d < 0.0) fail(child(ptr, key), "expected a non-negative number");
        return d;
    }

    std::string string(const json& v, const std::string& ptr) const {
        if (!v.is_string()) fail(ptr, "expected a string");
        return v.get<std::string>();
    }

    bool boolean(const json& v, const std::string& ptr) const {
        if (!v.is_boolean()) fail(ptr, "expected true or false");
        return v.get<bool>();
    }

    sim::Vec2 vec2(const json& v, const std::string& ptr) const {
        if (!v.is_array() || v.size() != 2) fail(ptr, "expected [x, y]");
        return {number(v[0], ptr + "/0"), number(v[1], ptr + "/1")};
    }

    Mask mask_source(const json& v, const std::string& ptr) const;
    void rasterize_shape(const json& shape, const std::string& ptr, Mask& mask) const;
    SimulatorConfig simulator(const json& v, const std::string& ptr, const SceneSpec& spec) const;
    FluidScene fluid(const json& v, const std::string& ptr) const;
    BoidsScene boids(const json& v, const std::string& ptr, const SceneSpec& spec) const;
    RigidScene rigid(const json& v, const std::string& ptr) const;
    void sampler(const json& v, const std::string& ptr, SceneSpec& spec) const;
    void schedule(const json& v, const std::string& ptr, SceneSpec& spec) const;

    std::string_view text_;
    std::filesystem::path base_dir_;
    std::string origin_;
    std::optional<JsonLocator> locator_;
    int width_ = 0;
    int height_ = 0;
};

Mask Parser::mask_source(const json& v, const std::string& ptr) const {
    auto load_file = [&](const std::string& rel, const std::string& at) {
        const std::filesystem::path path = base_dir_ / rel;
        if (!std::filesystem::exists(path)) fail(at, "mask file '" + path.string() + "' does not exist");
        Mask m;
        try {
            m = io::read_mask(path);
        } catch (const std::exception& e) {
            fail(at, e.what());
        }
        if (m.width() != width_ || m.height() != height_) {
            fail(at, "mask is " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                         ", canvas is " + std::to_string(width_) + "x" + std::to_string(height_));
        }
        return m;
    };
    if (v.is_string()) return load_file(v.get<std::string>(), ptr);
    object_at(v, ptr);
    allow_keys(v, ptr, {"file", "shapes"});
    const json* file = find(v, "file");
    const json* shapes = find(v, "shapes");
    if ((file == nullptr) == (shapes == nullptr)) fail(ptr, "a mask needs exactly one of 'file' or 'shapes'");
    if (file) return load_file(string(*file, child(ptr, "file")), child(ptr, "file"));
    if (!shapes->is_array()) fail(child(ptr, "shapes"), "expected an array of shapes");
    Mask mask(width_, height_);
    for (std::size_t i = 0; i < shapes->size(); ++i) {
        rasterize_shape((*shapes)[i], child(child(ptr, "shapes"), std::to_string(i)), mask);
    }
    return mask;
}

void Parser::rasterize_shape(const json& shape, const std::string& ptr, Mask& mask) const {
    object_at(shape, ptr);
    if (shape.size() != 1) fail(ptr, "a shape is an object with a single key: 'disk' or 'rect'");
    const std::string kind = shape.begin().key();
    const json& body = shape.begin().value();
    const std::string at = child(ptr, kind);
    object_at(body, at);
    if (kind == "disk") {
        allow_keys(body, at, {"center", "radius"});
        const sim::Vec2 c = vec2(require(body, at, "center"), child(at, "center"));
        const double r = number(require(body, at, "radius"), child(at, "radius"));
        if (!(r > 0.0)) fail(child(at, "radius"), "radius must be positive");
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r) mask.set(x, y, true);
            }
        }
    } else if (kind == "rect") {
        allow_keys(body, at, {"x", "y", "width", "height"});
        const int x0 = int_in(require(body, at, "x"), child(at, "x"), -(1 << 20), 1 << 20);
        const int y0 = int_in(require(body, at, "y"), child(at, "y"), -(1 << 20), 1 << 20);
        const int w = int_in(require(body, at, "width"), child(at, "width"), 1, 1 << 20);
        const int h = int_in(require(body, at, "height"), child(at, "height"), 1, 1 << 20);
        for (int y = std::max(0, y0); y < std::min(height_, y0 + h); ++y) {
            for (int x = std::max(0, x0); x < std::min(width_, x0 + w); ++x) mask.set(x, y, true);
        }
    } else {
        fail(ptr, "unknown shape '" + kind + "'");
    }
}

FluidScene Parser::fluid(const json& v, const std::string& ptr) const {
    allow_keys(v, ptr,
               {"type", "sources", "obstacles", "buoyancy", "viscosity", "substeps", "pressure_iterations",
                "pressure_tolerance", "backtrace", "initial_velocity_noise"});
    FluidScene f;
    const json& sources = require(v, ptr, "sources");
    const std::string sp = child(ptr, "sources");
    if (!sources.is_array() || sources.empty()) fail(sp, "expected a non-empty array of smoke sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::string at = sp + "/" + std::to_string(i);
        object_at(sources[i], at);
        allow_keys(sources[i], at, {"mask", "heat"});
        f.sources.push_back({mask_source(require(sources[i], at, "mask"), child(at, "mask")),
                             number_or(sources[i], at, "heat", 1.0)});
    }
    f.obstacles = find(v, "obstacles") ? mask_source(v["obstacles"], child(ptr, "obstacles")) : Mask(width_, height_);
    for (std::size_t i = 0; i < f.sources.size(); ++i) {
        const Mask& m = f.sources[i].mask;
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                if (m.at(x, y) && f.obstacles.at(x, y)) {
                    fail(sp + "/" + std::to_string(i), "smoke source overlaps an obstacle at (" + std::to_string(x) +
                                                           ", " + std::to_string(y) + ")");
                }
            }
        }
    }
    f.buoyancy = find(v, "buoyancy") ? vec2(v["buoyancy"], child(ptr, "buoyancy")) : sim::Vec2{0.0, -0.05};
    f.params.viscosity = non_negative_or(v, ptr, "viscosity", 0.0);
    if (const json* s = find(v, "substeps")) f.params.substeps = int_in(*s, child(ptr, "substeps"), 1, 64);
    if (const json* s = find(v, "pressure_iterations")) {
        f.params.pressure_max_iterations = int_in(*s, child(ptr, "pressure_iterations"), 1, 1000000);
    }
    f.params.pressure_tolerance = positive_or(v, ptr, "pressure_tolerance", f.params.pressure_tolerance);
    if (const json* b = find(v, "backtrace")) {
        const std::string name = string(*b, child(ptr, "backtrace"));
        if (name == "euler") f.params.backtrace = sim::Backtrace::euler;
        else if (name == "rk2") f.params.backtrace = sim::Backtrace::rk2;
        else fail(child(ptr, "backtrace"), "expected \"euler\" or \"rk2\"");
    }
    f.initial_velocity_noise = non_negative_or(v, ptr, "initial_velocity_noise", 0.0);
    return f;
}

BoidsScene Parser::boids(const json& v, const std::string& ptr, const SceneSpec& spec) const {
    allow_keys(v, ptr, {"type", "count", "placement", "params", "bounds", "patch_radius"});
    BoidsScene b;
    if (const json* p = find(v, "params")) {
        const std::string at = child(ptr, "params");
        object_at(*p, at);
        allow_keys(*p, at,
                   {"perception_radius", "separation_radius", "w_separation", "w_alignment", "w_cohesion",
                    "max_speed", "max_force"});
        b.params.perception_radius = positive_or(*p, at, "perception_radius", b.params.perception_radius);
        b.params.separation_radius = positive_or(*p, at, "separation_radius", b.params.separation_radius);
        b.params.w_separation = non_negative_or(*p, at, "w_separation", b.params.w_separation);
        b.params.w_alignment = non_negative_or(*p, at, "w_alignment", b.params.w_alignment);
        b.params.w_cohesion = non_negative_or(*p, at, "w_cohesion", b.params.w_cohesion);
        b.params.max_speed = positive_or(*p, at, "max_speed", b.params.max_speed);
        b.params.max_force = positive_or(*p, at, "max_force", b.params.max_force);
    }
    if (const json* bounds = find(v, "bounds")) {
        const std::string name = string(*bounds, child(ptr, "bounds"));
        if (name == "wrap") b.bounds = sim::BoundsPolicy::wrap;
        else if (name == "reflect") b.bounds = sim::BoundsPolicy::reflect;
        else fail(child(ptr, "bounds"), "expected \"wrap\" or \"reflect\"");
    }
    b.patch_radius = number_or(v, ptr, "patch_radius", b.patch_radius);
    if (b.patch_radius < 1.0) fail(child(ptr, "patch_radius"), "patch_radius must be at least 1");

    const json* placement = find(v, "placement");
    if (placement != nullptr && placement->is_array()) {
        const std::string at = child(ptr, "placement");
        for (std::size_t i = 0; i < placement->size(); ++i) {
            const std::string ap = at + "/" + std::to_string(i);
            const json& a = object_at((*placement)[i], ap);
            allow_keys(a, ap, {"position", "velocity"});
            const sim::Vec2 pos = vec2(require(a, ap, "position"), child(ap, "position"));
            if (pos.x < 0 || pos.x >= spec.width || pos.y < 0 || pos.y >= spec.height) {
                fail(child(ap, "position"), "agent lies outside the canvas");
            }
            const sim::Vec2 vel = find(a, "velocity") ? vec2(a["velocity"], child(ap, "velocity")) : sim::Vec2{};
            b.agents.push_back({pos, vel});
        }
        if (const json* c = find(v, "count")) {
            if (integer(*c, child(ptr, "count")) != static_cast<long long>(b.agents.size())) {
                fail(child(ptr, "count"), "count disagrees with the explicit placement list");
            }
        }
        if (b.agents.empty()) fail(at, "placement list is empty");
        return b;
    }
    if (placement != nullptr && string(*placement, child(ptr, "placement")) != "random") {
        fail(child(ptr, "placement"), "expected \"random\" or a list of agents");
    }
    const int count = int_in(require(v, ptr, "count"), child(ptr, "count"), 1, 100000);
    // Uniform positions, headings uniform on the circle, speed half the cap.
    const CounterRng rng = CounterRng(spec.seed).substream(0xB01D5);
    for (int i = 0; i < count; ++i) {
        const auto k = static_cast<std::uint64_t>(i) * 3;
        const double heading = 2.0 * std::numbers::pi * rng.uniform(k + 2);
        const double speed = 0.5 * b.params.max_speed;
        b.agents.push_back({{rng.uniform(k) * spec.width, rng.uniform(k + 1) * spec.height},
                            {speed * std::cos(heading), speed * std::sin(heading)}});
    }
    return b;
}

RigidScene Parser::rigid(const json& v, const std::string& ptr) const {
    allow_keys(v, ptr, {"type", "motion"});
    const std::string at = child(ptr, "motion");
    const json& m = object_at(require(v, ptr, "motion"), at);
    const std::string kind = string(require(m, at, "kind"), child(at, "kind"));
    if (kind == "translate") {
        allow_keys(m, at, {"kind", "dx", "dy"});
        return {sim::Translate{number_or(m, at, "dx", 0.0), number_or(m, at, "dy", 0.0)}};
    }
    if (kind == "sphere_rotation") {
        allow_keys(m, at, {"kind", "center", "radius", "axis", "angle"});
        sim::SphereRotation s;
        s.center = vec2(require(m, at, "center"), child(at, "center"));
        s.radius = positive_or(m, at, "radius", 1.0);
        if (const json* a = find(m, "axis")) {
            if (!a->is_array() || a->size() != 3) fail(child(at, "axis"), "expected [x, y, z]");
            for (int i = 0; i < 3; ++i) s.axis[i] = number((*a)[i], child(at, "axis/" + std::to_string(i)));
            const double n = std::sqrt(s.axis[0] * s.axis[0] + s.axis[1] * s.axis[1] + s.axis[2] * s.axis[2]);
            if (std::abs(n - 1.0) > 1e-9) fail(child(at, "axis"), "axis must be a unit vector");
        }
        s.angle = number(require(m, at, "angle"), child(at, "angle"));
        const double nx = std::clamp(s.center.x, 0.0, width_ - 1.0);
        const double ny = std::clamp(s.center.y, 0.0, height_ - 1.0);
        if (std::hypot(nx - s.center.x, ny - s.center.y) >= s.radius) {
            fail(at, "the sphere's disk does not intersect the canvas");
        }
        return {s};
    }
    if (kind == "radial_growth") {
        allow_keys(m, at, {"kind", "center", "rate", "mask"});
        sim::RadialGrowth g;
        g.center = vec2(require(m, at, "center"), child(at, "center"));
        g.rate = number_or(m, at, "rate", 1.0);
        if (const json* mk = find(m, "mask")) g.mask = mask_source(*mk, child(at, "mask"));
        return {g};
    }
    fail(child(at, "kind"), "expected \"translate\", \"sphere_rotation\" or \"radial_growth\"");
}

SimulatorConfig Parser::simulator(const json& v, const std::string& ptr, const SceneSpec& spec) const {
    object_at(v, ptr);
    const std::string type = string(require(v, ptr, "type"), child(ptr, "type"));
    if (type == "fluid") return fluid(v, ptr);
    if (type == "boids") return boids(v, ptr, spec);
    if (type == "rigid") return rigid(v, ptr);
    fail(child(ptr, "type"), "expected \"fluid\", \"boids\" or \"rigid\"");
}

void Parser::sampler(const json& v, const std::string& ptr, SceneSpec& spec) const {
    object_at(v, ptr);
    allow_keys(v, ptr, {"gamma", "eta", "attend", "use_inversion"});
    spec.sampler.gamma = non_negative_or(v, ptr, "gamma", spec.sampler.gamma);
    if (const json* e = find(v, "eta"); e != nullptr && !e->is_null()) {
        const double eta = number(*e, child(ptr, "eta"));
        if (eta < 0.0 || eta > 1.0) fail(child(ptr, "eta"), "eta must lie in [0, 1]");
        spec.sampler.eta_scalar = eta;
    }
    if (const json* a = find(v, "attend")) {
        try {
            spec.sampler.attend = parse_attend_set(string(*a, child(ptr, "attend")));
        } catch (const ValidationError& e) {
            fail(child(ptr, "attend"), e.what());
        }
    }
    if (const json* u = find(v, "use_inversion")) spec.sampler.use_inversion = boolean(*u, child(ptr, "use_inversion"));
}

void Parser::schedule(const json& v, const std::string& ptr, SceneSpec& spec) const {
    object_at(v, ptr);
    allow_keys(v, ptr, {"train_steps", "beta_start", "beta_end", "spacing", "inference_steps", "tau"});
    ScheduleConfig& c = spec.schedule;
    if (const json* t = find(v, "train_steps")) c.train_steps = int_in(*t, child(ptr, "train_steps"), 2, 100000);
    c.beta_start = number_or(v, ptr, "beta_start", c.beta_start);
    c.beta_end = number_or(v, ptr, "beta_end", c.beta_end);
    if (const json* s = find(v, "spacing")) {
        const std::string name = string(*s, child(ptr, "spacing"));
        if (name == "linear") c.spacing = BetaSpacing::linear;
        else if (name == "sqrt_space") c.spacing = BetaSpacing::sqrt_space;
        else fail(child(ptr, "spacing"), "expected \"linear\" or \"sqrt_space\"");
    }
    if (const json* n = find(v, "inference_steps")) {
        c.inference_steps = int_in(*n, child(ptr, "inference_steps"), 1, 100000);
    }
    if (const json* t = find(v, "tau")) c.tau = int_in(*t, child(ptr, "tau"), 0, 100000);
    try {
        make_schedule(c);
    } catch (const ValidationError& e) {
        fail(ptr, e.what());
    }
}

SceneSpec Parser::parse() {
    json root;
    try {
        root = json::parse(text_);
    } catch (const json::parse_error& e) {
        const TextPosition pos = position_of(text_, e.byte > 0 ? e.byte - 1 : 0);
        throw ValidationError(origin_ + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) +
                              ": malformed JSON: " + e.what());
    }
    locator_.emplace(text_);
    object_at(root, "");
    allow_keys(root, "",
               {"$schema", "name", "description", "canvas", "frames", "seed", "latent_factor", "simulator", "eta",
                "sampler", "schedule", "toy", "prompts", "metadata"});

    SceneSpec spec;
    spec.name = string(require(root, "", "name"), "/name");
    if (spec.name.empty()) fail("/name", "name must not be empty");
    if (const json* d = find(root, "description")) spec.description = string(*d, "/description");

    const json& canvas = object_at(require(root, "", "canvas"), "/canvas");
    allow_keys(canvas, "/canvas", {"width", "height"});
    spec.width = int_in(require(canvas, "/canvas", "width"), "/canvas/width", 2, 1 << 14);
    spec.height = int_in(require(canvas, "/canvas", "height"), "/canvas/height", 2, 1 << 14);
    width_ = spec.width;
    height_ = spec.height;

    spec.frames = int_in(require(root, "", "frames"), "/frames", 1, 100000);
    if (const json* s = find(root, "seed")) {
        if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
            fail("/seed", "expected a non-negative integer");
        }
        spec.seed = s->get<std::uint64_t>();
    }
    if (const json* f = find(root, "latent_factor")) spec.latent_factor = int_in(*f, "/latent_factor", 1, 64);
    if (spec.width % spec.latent_factor != 0 || spec.height % spec.latent_factor != 0) {
        fail(find(root, "latent_factor") ? "/latent_factor" : "/canvas",
             "canvas " + std::to_string(spec.width) + "x" + std::to_string(spec.height) +
                 " is not divisible by the latent factor " + std::to_string(spec.latent_factor));
    }
    if (spec.latent_width() < 2 || spec.latent_height() < 2) {
        fail("/latent_factor", "latent grid must be at least 2x2");
    }

    spec.simulator = simulator(require(root, "", "simulator"), "/simulator", spec);

    if (const json* e = find(root, "eta")) {
        object_at(*e, "/eta");
        allow_keys(*e, "/eta", {"threshold", "masks", "occlusion"});
        spec.eta.threshold = positive_or(*e, "/eta", "threshold", spec.eta.threshold);
        if (const json* masks = find(*e, "masks")) {
            if (!masks->is_array()) fail("/eta/masks", "expected an array of masks");
            for (std::size_t i = 0; i < masks->size(); ++i) {
                spec.eta.masks.push_back(mask_source((*masks)[i], "/eta/masks/" + std::to_string(i)));
            }
        }
        if (const json* o = find(*e, "occlusion")) spec.eta.occlusion = boolean(*o, "/eta/occlusion");
    }
    spec.sampler.seed = spec.seed;
    if (const json* s = find(root, "sampler")) sampler(*s, "/sampler", spec);
    if (const json* s = find(root, "schedule")) schedule(*s, "/schedule", spec);
    if (const json* t = find(root, "toy")) {
        object_at(*t, "/toy");
        allow_keys(*t, "/toy", {"prior_s", "negative_shift"});
        spec.toy.prior_s = positive_or(*t, "/toy", "prior_s", spec.toy.prior_s);
        spec.toy.negative_shift = number_or(*t, "/toy", "negative_shift", spec.toy.negative_shift);
    }
    if (const json* p = find(root, "prompts")) {
        object_at(*p, "/prompts");
        allow_keys(*p, "/prompts", {"positive", "negative"});
        if (const json* s = find(*p, "positive")) spec.sampler.conditioning.prompt = string(*s, "/prompts/positive");
        if (const json* s = find(*p, "negative")) {
            spec.sampler.conditioning.negative_prompt = string(*s, "/prompts/negative");
        }
    }
    if (const json* m = find(root, "metadata")) object_at(*m, "/metadata");
    spec.source_sha256 = sha256_hex(text_);
    return spec;
}

} // namespace

SceneSpec parse_scene(std::string_view text, const std::filesystem::path& base_dir, const std::string& origin) {
    return Parser(text, base_dir, origin).parse();
}

SceneSpec load_scene(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return parse_scene(text, path.parent_path(), path.string());
}

const char* simulator_name(const SimulatorConfig& simulator) {
    switch (simulator.index()) {
    case 0: return "fluid";
    case 1: return "boids";
    default: return "rigid";
    }
}

} // namespace flowgen::scene
