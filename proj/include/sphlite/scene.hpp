#pragma once

#include <fstream>

#include <json.hpp>

#include "boundary.hpp"
#include "elastic.hpp"
#include "nonpressure.hpp"
#include "particles.hpp"

namespace sphlite {

enum class SolverKind { Sesph, Pcisph, Iisph, Dfsph };
enum class SesphVariantKind { LinearQuotient, LinearDifference, PowerLaw };

inline std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::Sesph: return "sesph";
        case SolverKind::Pcisph: return "pcisph";
        case SolverKind::Iisph: return "iisph";
        default: return "dfsph";
    }
}

inline SolverKind solver_from_string(const std::string& s) {
    if (s == "sesph") return SolverKind::Sesph;
    if (s == "pcisph") return SolverKind::Pcisph;
    if (s == "iisph") return SolverKind::Iisph;
    if (s == "dfsph") return SolverKind::Dfsph;
    throw ConfigError("unknown solver '" + s + "'; valid options: sesph, pcisph, iisph, dfsph");
}

struct FluidBlockConfig {
    Vec3 bmin = Vec3::Zero();
    Vec3 bmax = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    FluidMaterial material;
    Real conc0 = 0;
};

struct BoundaryShapeConfig {
    enum class Kind { Plane, Box, Sphere } kind = Kind::Box;
    Vec3 a = Vec3::Zero(); // plane center / box min / sphere center
    Vec3 b = Vec3::Zero(); // box max
    Real extent_u = 1, extent_v = 1;
    int normal_axis = 1;
    Real radius = 1;
    bool open_top = false;
    Real spacing = 0; // 0: use particle size
};

struct RigidConfig {
    enum class Kind { Box, Sphere } kind = Kind::Box;
    Vec3 center = Vec3::Zero();
    Vec3 extents = Vec3::Ones(); // box edge lengths
    Real radius = 1;
    Real density = 500;
    Vec3 velocity = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();
    bool is_static = false;
    Real spacing = 0;
};

struct SolidConfig {
    Vec3 bmin = Vec3::Zero();
    Vec3 bmax = Vec3::Zero();
    elastic::ElasticMaterial material;
    Real spacing = 0;
};

struct SceneConfig {
    SolverKind solver = SolverKind::Dfsph;
    SesphVariantKind sesph_variant = SesphVariantKind::LinearDifference;
    Vec3 gravity = Vec3(0, -9.81, 0);
    Real duration = 1;
    Real fps = 25;
    Real dt_min = 1e-5;
    Real dt_max = 5e-3;
    Real cfl_lambda = 0.4;
    Real particle_size = 0.025;
    int zsort_every = 1000;
    Real max_density_error_pct = 0.1;
    int max_iterations = 100;
    bool number_density_multiphase = false;
    Real diffusion_alpha = 0;

    nonpressure::ViscosityMode viscosity_mode = nonpressure::ViscosityMode::Off;
    Real mu_boundary = 0;
    nonpressure::SurfaceTensionMode st_mode = nonpressure::SurfaceTensionMode::Off;
    nonpressure::VorticityMode vort_mode = nonpressure::VorticityMode::Off;
    Real xsph_alpha = 0;

    std::vector<FluidBlockConfig> fluids;
    std::vector<BoundaryShapeConfig> boundaries;
    std::vector<RigidConfig> rigids;
    std::vector<SolidConfig> solids;
    std::string output_dir = "out";

    void validate() const {
        if (dt_min > dt_max) throw ConfigError("time_step: dt_min must be <= dt_max");
        if (cfl_lambda <= Real(0)) throw ConfigError("time_step: cfl_lambda must be positive");
        if (particle_size <= Real(0)) throw ConfigError("particle_size must be positive");
        if (fps <= Real(0)) throw ConfigError("fps must be positive");
        if (xsph_alpha < Real(0) || xsph_alpha >= Real(1))
            throw ConfigError("nonpressure.xsph_alpha must lie in [0, 1)");
        for (size_t i = 0; i < fluids.size(); ++i) {
            try {
                fluids[i].material.validate();
            } catch (const ConfigError& e) {
                throw ConfigError("fluids[" + std::to_string(i) + "]: " + e.what());
            }
            for (int d = 0; d < 3; ++d)
                if (fluids[i].bmax[d] < fluids[i].bmin[d])
                    throw ConfigError("fluids[" + std::to_string(i) + "]: max must be >= min");
        }
        for (size_t i = 0; i < boundaries.size(); ++i) {
            const Real sp = boundaries[i].spacing > 0 ? boundaries[i].spacing : particle_size;
            if (sp > particle_size * (Real(1) + Real(1e-9)))
                throw ConfigError("boundaries[" + std::to_string(i) +
                                  "].spacing exceeds the particle size; leakage would occur");
        }
        for (size_t i = 0; i < rigids.size(); ++i) {
            const Real sp = rigids[i].spacing > 0 ? rigids[i].spacing : particle_size;
            if (!fluids.empty() && sp > particle_size * (Real(1) + Real(1e-9)))
                throw ConfigError("rigids[" + std::to_string(i) +
                                  "].spacing exceeds the particle size; leakage would occur");
        }
        if (!number_density_multiphase && fluids.size() > 1)
            for (size_t i = 1; i < fluids.size(); ++i)
                if (std::abs(fluids[i].material.rho0 - fluids[0].material.rho0) >
                    Real(1e-9) * fluids[0].material.rho0)
                    throw ConfigError(
                        "fluids with different rest densities require number_density_multiphase");
    }
};

namespace detail {

using nlohmann::json;

inline const json& req(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("scene: missing field " + path + key);
    return *it;
}

inline Vec3 vec3_of(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("scene: " + path + " must be an array of 3 numbers");
    return Vec3(j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>());
}

inline json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

inline int axis_of(const json& j, const std::string& path) {
    const std::string s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw ConfigError("scene: " + path + " must be one of x, y, z");
}

inline std::string axis_name(int a) { return a == 0 ? "x" : a == 1 ? "y" : "z"; }

} // namespace detail

inline SceneConfig scene_from_json(const nlohmann::json& j) {
    using detail::req;
    using detail::vec3_of;
    SceneConfig c;
    c.solver = solver_from_string(req(j, "solver", "").get<std::string>());
    if (j.contains("sesph_variant")) {
        const std::string v = j["sesph_variant"].get<std::string>();
        if (v == "linear-quotient") c.sesph_variant = SesphVariantKind::LinearQuotient;
        else if (v == "linear-difference") c.sesph_variant = SesphVariantKind::LinearDifference;
        else if (v == "power-law") c.sesph_variant = SesphVariantKind::PowerLaw;
        else throw ConfigError("scene: sesph_variant must be linear-quotient, linear-difference or power-law");
    }
    if (j.contains("gravity")) c.gravity = vec3_of(j["gravity"], "gravity");
    c.duration = j.value("duration", c.duration);
    c.fps = j.value("fps", c.fps);
    c.dt_min = j.value("dt_min", c.dt_min);
    c.dt_max = j.value("dt_max", c.dt_max);
    c.cfl_lambda = j.value("cfl_lambda", c.cfl_lambda);
    c.particle_size = req(j, "particle_size", "").get<Real>();
    c.zsort_every = j.value("zsort_every", c.zsort_every);
    c.max_density_error_pct = j.value("max_density_error_pct", c.max_density_error_pct);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.number_density_multiphase = j.value("number_density_multiphase", false);
    c.diffusion_alpha = j.value("diffusion_alpha", Real(0));
    c.output_dir = j.value("output", c.output_dir);

    if (j.contains("nonpressure")) {
        const auto& np = j["nonpressure"];
        const std::string vm = np.value("viscosity_mode", "off");
        if (vm == "off") c.viscosity_mode = nonpressure::ViscosityMode::Off;
        else if (vm == "explicit-laplacian") c.viscosity_mode = nonpressure::ViscosityMode::ExplicitLaplacian;
        else if (vm == "xsph") c.viscosity_mode = nonpressure::ViscosityMode::Xsph;
        else if (vm == "implicit") c.viscosity_mode = nonpressure::ViscosityMode::Implicit;
        else throw ConfigError("scene: nonpressure.viscosity_mode must be off, explicit-laplacian, xsph or implicit");
        c.mu_boundary = np.value("mu_boundary", Real(0));
        const std::string st = np.value("st_mode", "off");
        if (st == "off") c.st_mode = nonpressure::SurfaceTensionMode::Off;
        else if (st == "becker") c.st_mode = nonpressure::SurfaceTensionMode::Becker;
        else if (st == "akinci") c.st_mode = nonpressure::SurfaceTensionMode::Akinci;
        else throw ConfigError("scene: nonpressure.st_mode must be off, becker or akinci");
        const std::string vo = np.value("vort_mode", "off");
        if (vo == "off") c.vort_mode = nonpressure::VorticityMode::Off;
        else if (vo == "confinement") c.vort_mode = nonpressure::VorticityMode::Confinement;
        else if (vo == "micropolar") c.vort_mode = nonpressure::VorticityMode::Micropolar;
        else throw ConfigError("scene: nonpressure.vort_mode must be off, confinement or micropolar");
        c.xsph_alpha = np.value("xsph_alpha", Real(0));
    }

    size_t idx = 0;
    for (const auto& f : j.value("fluids", nlohmann::json::array())) {
        const std::string path = "fluids[" + std::to_string(idx++) + "].";
        FluidBlockConfig fb;
        fb.bmin = vec3_of(req(f, "min", path), path + "min");
        fb.bmax = vec3_of(req(f, "max", path), path + "max");
        if (f.contains("velocity")) fb.velocity = vec3_of(f["velocity"], path + "velocity");
        fb.material.particle_size = c.particle_size;
        fb.material.rho0 = f.value("rho0", fb.material.rho0);
        fb.material.mu = f.value("mu", fb.material.mu);
        fb.material.k = f.value("k", fb.material.k);
        fb.material.k1 = f.value("k1", fb.material.k1);
        fb.material.k2 = f.value("k2", fb.material.k2);
        fb.material.alpha_st = f.value("alpha_st", fb.material.alpha_st);
        fb.material.beta_adh = f.value("beta_adh", fb.material.beta_adh);
        fb.material.nu_t = f.value("nu_t", fb.material.nu_t);
        fb.material.micro_inertia = f.value("micro_inertia", fb.material.micro_inertia);
        fb.material.eps_vort = f.value("eps_vort", fb.material.eps_vort);
        fb.conc0 = f.value("conc", Real(0));
        c.fluids.push_back(fb);
    }
    idx = 0;
    for (const auto& b : j.value("boundaries", nlohmann::json::array())) {
        const std::string path = "boundaries[" + std::to_string(idx++) + "].";
        BoundaryShapeConfig bc;
        const std::string shape = req(b, "shape", path).get<std::string>();
        bc.spacing = b.value("spacing", Real(0));
        if (shape == "plane") {
            bc.kind = BoundaryShapeConfig::Kind::Plane;
            bc.a = vec3_of(req(b, "center", path), path + "center");
            bc.normal_axis = detail::axis_of(req(b, "normal_axis", path), path + "normal_axis");
            const auto& e = req(b, "extent", path);
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("scene: " + path + "extent must be an array of 2 numbers");
            bc.extent_u = e[0].get<Real>();
            bc.extent_v = e[1].get<Real>();
        } else if (shape == "box") {
            bc.kind = BoundaryShapeConfig::Kind::Box;
            bc.a = vec3_of(req(b, "min", path), path + "min");
            bc.b = vec3_of(req(b, "max", path), path + "max");
            bc.open_top = b.value("open_top", false);
        } else if (shape == "sphere") {
            bc.kind = BoundaryShapeConfig::Kind::Sphere;
            bc.a = vec3_of(req(b, "center", path), path + "center");
            bc.radius = req(b, "radius", path).get<Real>();
        } else {
            throw ConfigError("scene: " + path + "shape must be plane, box or sphere");
        }
        c.boundaries.push_back(bc);
    }
    idx = 0;
    for (const auto& r : j.value("rigids", nlohmann::json::array())) {
        const std::string path = "rigids[" + std::to_string(idx++) + "].";
        RigidConfig rc;
        const std::string shape = req(r, "shape", path).get<std::string>();
        if (shape == "box") {
            rc.kind = RigidConfig::Kind::Box;
            rc.extents = vec3_of(req(r, "extents", path), path + "extents");
        } else if (shape == "sphere") {
            rc.kind = RigidConfig::Kind::Sphere;
            rc.radius = req(r, "radius", path).get<Real>();
        } else {
            throw ConfigError("scene: " + path + "shape must be box or sphere");
        }
        rc.center = vec3_of(req(r, "center", path), path + "center");
        rc.density = r.value("density", rc.density);
        if (r.contains("velocity")) rc.velocity = vec3_of(r["velocity"], path + "velocity");
        if (r.contains("angular_velocity"))
            rc.angular_velocity = vec3_of(r["angular_velocity"], path + "angular_velocity");
        rc.is_static = r.value("static", false);
        rc.spacing = r.value("spacing", Real(0));
        c.rigids.push_back(rc);
    }
    idx = 0;
    for (const auto& s : j.value("solids", nlohmann::json::array())) {
        const std::string path = "solids[" + std::to_string(idx++) + "].";
        SolidConfig sc;
        sc.bmin = detail::vec3_of(req(s, "min", path), path + "min");
        sc.bmax = detail::vec3_of(req(s, "max", path), path + "max");
        sc.material.youngs = s.value("youngs_modulus", sc.material.youngs);
        sc.material.poisson = s.value("poisson_ratio", sc.material.poisson);
        sc.material.hourglass_alpha = s.value("hourglass_alpha", sc.material.hourglass_alpha);
        sc.material.rho0 = s.value("rho0", sc.material.rho0);
        sc.spacing = s.value("spacing", Real(0));
        c.solids.push_back(sc);
    }
    c.validate();
    return c;
}

inline nlohmann::json scene_to_json(const SceneConfig& c) {
    using detail::to_json;
    nlohmann::json j;
    j["solver"] = to_string(c.solver);
    j["sesph_variant"] = c.sesph_variant == SesphVariantKind::LinearQuotient ? "linear-quotient"
                         : c.sesph_variant == SesphVariantKind::LinearDifference ? "linear-difference"
                                                                                  : "power-law";
    j["gravity"] = to_json(c.gravity);
    j["duration"] = c.duration;
    j["fps"] = c.fps;
    j["dt_min"] = c.dt_min;
    j["dt_max"] = c.dt_max;
    j["cfl_lambda"] = c.cfl_lambda;
    j["particle_size"] = c.particle_size;
    j["zsort_every"] = c.zsort_every;
    j["max_density_error_pct"] = c.max_density_error_pct;
    j["max_iterations"] = c.max_iterations;
    j["number_density_multiphase"] = c.number_density_multiphase;
    j["diffusion_alpha"] = c.diffusion_alpha;
    j["output"] = c.output_dir;
    nlohmann::json np;
    np["viscosity_mode"] = c.viscosity_mode == nonpressure::ViscosityMode::Off ? "off"
                           : c.viscosity_mode == nonpressure::ViscosityMode::ExplicitLaplacian
                               ? "explicit-laplacian"
                           : c.viscosity_mode == nonpressure::ViscosityMode::Xsph ? "xsph"
                                                                                   : "implicit";
    np["mu_boundary"] = c.mu_boundary;
    np["st_mode"] = c.st_mode == nonpressure::SurfaceTensionMode::Off      ? "off"
                    : c.st_mode == nonpressure::SurfaceTensionMode::Becker ? "becker"
                                                                           : "akinci";
    np["vort_mode"] = c.vort_mode == nonpressure::VorticityMode::Off           ? "off"
                      : c.vort_mode == nonpressure::VorticityMode::Confinement ? "confinement"
                                                                               : "micropolar";
    np["xsph_alpha"] = c.xsph_alpha;
    j["nonpressure"] = np;
    j["fluids"] = nlohmann::json::array();
    for (const auto& f : c.fluids) {
        nlohmann::json jf;
        jf["min"] = to_json(f.bmin);
        jf["max"] = to_json(f.bmax);
        jf["velocity"] = to_json(f.velocity);
        jf["rho0"] = f.material.rho0;
        jf["mu"] = f.material.mu;
        jf["k"] = f.material.k;
        jf["k1"] = f.material.k1;
        jf["k2"] = f.material.k2;
        jf["alpha_st"] = f.material.alpha_st;
        jf["beta_adh"] = f.material.beta_adh;
        jf["nu_t"] = f.material.nu_t;
        jf["micro_inertia"] = f.material.micro_inertia;
        jf["eps_vort"] = f.material.eps_vort;
        jf["conc"] = f.conc0;
        j["fluids"].push_back(jf);
    }
    j["boundaries"] = nlohmann::json::array();
    for (const auto& b : c.boundaries) {
        nlohmann::json jb;
        jb["spacing"] = b.spacing;
        switch (b.kind) {
            case BoundaryShapeConfig::Kind::Plane:
                jb["shape"] = "plane";
                jb["center"] = to_json(b.a);
                jb["normal_axis"] = detail::axis_name(b.normal_axis);
                jb["extent"] = nlohmann::json::array({b.extent_u, b.extent_v});
                break;
            case BoundaryShapeConfig::Kind::Box:
                jb["shape"] = "box";
                jb["min"] = to_json(b.a);
                jb["max"] = to_json(b.b);
                jb["open_top"] = b.open_top;
                break;
            case BoundaryShapeConfig::Kind::Sphere:
                jb["shape"] = "sphere";
                jb["center"] = to_json(b.a);
                jb["radius"] = b.radius;
                break;
        }
        j["boundaries"].push_back(jb);
    }
    j["rigids"] = nlohmann::json::array();
    for (const auto& r : c.rigids) {
        nlohmann::json jr;
        jr["shape"] = r.kind == RigidConfig::Kind::Box ? "box" : "sphere";
        jr["center"] = to_json(r.center);
        if (r.kind == RigidConfig::Kind::Box)
            jr["extents"] = to_json(r.extents);
        else
            jr["radius"] = r.radius;
        jr["density"] = r.density;
        jr["velocity"] = to_json(r.velocity);
        jr["angular_velocity"] = to_json(r.angular_velocity);
        jr["static"] = r.is_static;
        jr["spacing"] = r.spacing;
        j["rigids"].push_back(jr);
    }
    j["solids"] = nlohmann::json::array();
    for (const auto& s : c.solids) {
        nlohmann::json js;
        js["min"] = to_json(s.bmin);
        js["max"] = to_json(s.bmax);
        js["youngs_modulus"] = s.material.youngs;
        js["poisson_ratio"] = s.material.poisson;
        js["hourglass_alpha"] = s.material.hourglass_alpha;
        js["rho0"] = s.material.rho0;
        js["spacing"] = s.spacing;
        j["solids"].push_back(js);
    }
    return j;
}

inline SceneConfig load_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scene: cannot read file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("scene: JSON parse error in " + path + ": " + e.what());
    }
    return scene_from_json(j);
}

/// Cubic-lattice fill of an axis-aligned block, cells centered at spacing/2.
inline std::vector<Vec3> sample_block(const Vec3& bmin, const Vec3& bmax, Real spacing) {
    std::vector<Vec3> pts;
    int n[3];
    for (int d = 0; d < 3; ++d)
        n[d] = std::max(1, static_cast<int>(std::floor((bmax[d] - bmin[d]) / spacing + Real(0.5))));
    for (int ix = 0; ix < n[0]; ++ix)
        for (int iy = 0; iy < n[1]; ++iy)
            for (int iz = 0; iz < n[2]; ++iz)
                pts.push_back(bmin + spacing * Vec3(ix + Real(0.5), iy + Real(0.5), iz + Real(0.5)));
    return pts;
}

} // namespace sphlite
