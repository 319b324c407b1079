#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "multiphase.hpp"
#include "nonpressure.hpp"
#include "pressure.hpp"
#include "rigid.hpp"
#include "scene.hpp"
#include "sim_rigid_setup.hpp"

namespace sphlite::sim {

/// CFL time step dt = clamp(lambda * s / v_max, dt_min, dt_max); a resting
/// state gets dt_max so the simulation never stalls.
inline Real cfl_dt(Real v_max, Real particle_size, Real lambda, Real dt_min, Real dt_max) {
    if (!(v_max > Real(1e-12))) return dt_max;
    return std::clamp(lambda * particle_size / v_max, dt_min, dt_max);
}

struct StepDiagnostics {
    int step = 0;
    Real time = 0;
    Real dt = 0;
    Real avg_density_err_pct = 0;
    Real max_density_err_pct = 0;
    Real kinetic_energy = 0;
    Vec3 momentum = Vec3::Zero();
    int solver_iterations = 0;
    bool solver_converged = true;
    Real wall_time_s = 0;
};

class World {
public:
    SceneConfig cfg;
    KernelParams kp;

    ParticleSet fluid;
    std::vector<uint32_t> phase;
    multiphase::PhaseTag phases;
    std::vector<Real> rho0_i, mu_i, k1_i, k2_i; // per-particle material views

    BoundarySet bnd; // static samples first, then rigid-owned samples
    size_t n_static_bnd = 0;
    GammaCoefficients gamma;

    rigid::RigidWorld rigids;
    std::vector<elastic::ElasticBody> solids;

    int step_count = 0;
    Real time = 0;
    StepDiagnostics last;

    static World create(const SceneConfig& cfg) {
        World w;
        w.cfg = cfg;
        w.kp = make_kernel(Real(2) * cfg.particle_size, 3);

        for (uint32_t ph = 0; ph < cfg.fluids.size(); ++ph) {
            const auto& blk = cfg.fluids[ph];
            w.phases.rho0.push_back(blk.material.rho0);
            w.phases.mass.push_back(blk.material.particle_mass());
            w.phases.mu.push_back(blk.material.mu);
            w.phases.k1.push_back(blk.material.k1);
            w.phases.k2.push_back(blk.material.k2);
            for (const Vec3& p : sample_block(blk.bmin, blk.bmax, cfg.particle_size)) {
                w.fluid.x.push_back(p);
                w.fluid.v.push_back(blk.velocity);
                w.phase.push_back(ph);
                if (blk.conc0 != Real(0) || cfg.diffusion_alpha > Real(0)) w.fluid.enable_conc();
            }
        }
        w.fluid.resize(w.fluid.x.size());
        if (!w.fluid.conc.empty())
            for (size_t i = 0; i < w.fluid.size(); ++i)
                w.fluid.conc[i] = cfg.fluids[w.phase[i]].conc0;
        if (cfg.vort_mode == nonpressure::VorticityMode::Micropolar) w.fluid.enable_omega();
        w.phases.phase_id = w.phase;
        w.phases.validate();
        for (size_t i = 0; i < w.fluid.size(); ++i) {
            w.fluid.m[i] = w.phases.mass[w.phase[i]];
            w.rho0_i.push_back(w.phases.rho0[w.phase[i]]);
            w.mu_i.push_back(w.phases.mu[w.phase[i]]);
            w.k1_i.push_back(w.phases.k1[w.phase[i]]);
            w.k2_i.push_back(w.phases.k2[w.phase[i]]);
        }
        if (cfg.number_density_multiphase && cfg.solver != SolverKind::Sesph &&
            cfg.solver != SolverKind::Iisph)
            throw ConfigError("number_density_multiphase requires the sesph or iisph solver");

        w.gamma = boundary::template_gamma(w.kp, cfg.particle_size);
        const Real bnd_rho0 = cfg.fluids.empty() ? Real(1000) : cfg.fluids[0].material.rho0;

        for (const auto& bc : cfg.boundaries) {
            const Real sp = bc.spacing > 0 ? bc.spacing : cfg.particle_size;
            BoundarySet shape;
            switch (bc.kind) {
                case BoundaryShapeConfig::Kind::Plane:
                    shape = boundary::sample_plane(bc.a, bc.normal_axis, bc.extent_u, bc.extent_v, sp);
                    break;
                case BoundaryShapeConfig::Kind::Box:
                    shape = boundary::sample_box(bc.a, bc.b, sp, bc.open_top);
                    break;
                case BoundaryShapeConfig::Kind::Sphere:
                    shape = boundary::sample_sphere(bc.a, bc.radius, sp);
                    break;
            }
            w.bnd.append(shape, -1);
        }
        w.n_static_bnd = w.bnd.size();
        if (w.n_static_bnd) {
            const NeighborGrid grid = NeighborGrid::build(w.bnd.x, w.kp.support);
            const Neighborhood bb = build_neighborhood(w.bnd.x, w.bnd.x, grid, w.kp, true);
            boundary::boundary_masses(w.bnd, bb, w.kp, bnd_rho0, w.gamma.gamma1);
        }

        setup_rigids(w.rigids, cfg);
        for (uint32_t bi = 0; bi < w.rigids.bodies.size(); ++bi) {
            BoundarySet s = rigid_boundary_samples(w.rigids, bi, w.kp, bnd_rho0, w.gamma.gamma1);
            w.bnd.append(s, static_cast<int32_t>(bi));
        }

        for (const auto& sc : cfg.solids) {
            const Real sp = sc.spacing > 0 ? sc.spacing : cfg.particle_size;
            elastic::ElasticBody body;
            body.X = sample_block(sc.bmin, sc.bmax, sp);
            body.x = body.X;
            body.v.assign(body.X.size(), Vec3::Zero());
            body.material = sc.material;
            body.kernel = make_kernel(Real(2) * sp, 3);
            body.V0.assign(body.X.size(), sp * sp * sp);
            body.mass.assign(body.X.size(), sc.material.rho0 * sp * sp * sp);
            elastic::precompute_reference(body);
            w.solids.push_back(std::move(body));
        }

        w.accel_.resize(w.fluid.size(), Vec3::Zero());
        w.v_pred_.resize(w.fluid.size(), Vec3::Zero());
        w.warm_delta_.resize(w.fluid.size(), Vec3::Zero());
        w.kdfsph_.resize(w.fluid.size(), Real(0));
        w.delta_.resize(w.fluid.size(), Real(0));
        w.bnd_reaction_.resize(w.bnd.size(), Vec3::Zero());
        return w;
    }

    const Neighborhood& fluid_neighbors() const { return ff_; }
    const Neighborhood& boundary_neighbors() const { return fb_; }
    std::span<const Real> dfsph_factors() const { return kdfsph_; }
    std::span<const Vec3> predicted_velocities() const { return v_pred_; }

    void step() {
        const auto t0 = std::chrono::steady_clock::now();
        std::fill(bnd_reaction_.begin(), bnd_reaction_.end(), Vec3::Zero());
        Real dt = 0;
        int iters = 0;
        bool converged = true;
        if (cfg.solver == SolverKind::Dfsph)
            dt = dfsph_pipeline(iters, converged);
        else
            dt = standard_pipeline(iters, converged);
        substep_rigid_and_elastic(dt);
        ++step_count;
        time += dt;
        nan_check();
        fill_diagnostics(dt, iters, converged, t0);
    }

    /// Average |rho - rho0| / rho0 over fluid particles, in percent.
    Real avg_density_error_pct() const {
        if (fluid.size() == 0) return 0;
        Real acc = 0;
        for (size_t i = 0; i < fluid.size(); ++i)
            acc += std::abs(fluid.rho[i] - rho0_i[i]) / rho0_i[i];
        return Real(100) * acc / Real(fluid.size());
    }

    pressure::Params solver_params(Real dt) const {
        pressure::Params prm;
        prm.rho0 = rho0_i.empty() ? Real(1000) : rho0_i[0];
        prm.rho0_per_particle = rho0_i;
        prm.dt = dt;
        prm.tol_pct = cfg.max_density_error_pct;
        prm.max_iter = cfg.max_iterations;
        return prm;
    }

    pressure::BoundaryRefs boundary_refs() const {
        pressure::BoundaryRefs b;
        if (bnd.size()) {
            b.bs = &bnd;
            b.fb = &fb_;
            b.gamma2 = gamma.gamma2;
        }
        return b;
    }

    void rebuild_search() {
        maybe_zsort();
        const size_t nf = fluid.size();
        all_pos_.assign(fluid.x.begin(), fluid.x.end());
        all_pos_.insert(all_pos_.end(), bnd.x.begin(), bnd.x.end());
        grid_ = NeighborGrid::build(all_pos_, kp.support);
        ff_.offsets.assign(1, 0u);
        ff_.entries.clear();
        fb_.offsets.assign(1, 0u);
        fb_.entries.clear();
        const Real r2 = kp.support * kp.support;
        for (size_t i = 0; i < nf; ++i) {
            grid_.for_candidates(fluid.x[i], [&](uint32_t j) {
                if (j == i) return;
                const Vec3 xij = fluid.x[i] - all_pos_[j];
                if (xij.squaredNorm() > r2) return;
                if (j < nf)
                    ff_.entries.push_back({j, cubic_w(xij, kp), cubic_grad_w(xij, kp), xij});
                else
                    fb_.entries.push_back({static_cast<uint32_t>(j - nf), cubic_w(xij, kp),
                                           cubic_grad_w(xij, kp), xij});
            });
            ff_.offsets.push_back(static_cast<uint32_t>(ff_.entries.size()));
            fb_.offsets.push_back(static_cast<uint32_t>(fb_.entries.size()));
        }
    }

    void compute_density() {
        if (bnd.size())
            boundary::fluid_density_with_boundary(fluid, bnd, ff_, fb_, kp);
        else
            ops::density(fluid, ff_, kp);
        if (cfg.number_density_multiphase) {
            multiphase::number_density(fluid, ff_, kp, delta_);
            // adapted density: fluid part mass-blind; wall samples stand in
            // for missing samples of the particle's own phase, so their
            // volume is weighted with that phase's rest density
            for (size_t i = 0; i < fluid.size(); ++i) {
                Real rb = 0;
                for (const auto& e : fb_.of(i))
                    rb += bnd.volume[e.j] * e.w;
                fluid.rho[i] = fluid.m[i] * delta_[i] + rho0_i[i] * rb;
            }
        }
    }

private:
    Real standard_pipeline(int& iters, bool& converged) {
        rebuild_search();
        compute_density();
        nonpressure_accels();
        const Real dt = cfl_dt(max_speed(), cfg.particle_size, cfg.cfl_lambda, cfg.dt_min, cfg.dt_max);
        predict_velocities(dt);
        const pressure::Params prm = solver_params(dt);
        const pressure::BoundaryRefs bref = boundary_refs();

        if (cfg.number_density_multiphase && cfg.solver == SolverKind::Sesph) {
            adapted_pressure_stage(dt);
        } else if (cfg.solver == SolverKind::Sesph) {
            const auto variant = cfg.sesph_variant == SesphVariantKind::LinearQuotient
                                     ? pressure::SesphVariant::LinearQuotient
                                 : cfg.sesph_variant == SesphVariantKind::LinearDifference
                                     ? pressure::SesphVariant::LinearDifference
                                     : pressure::SesphVariant::PowerLaw;
            pressure::sesph(fluid, variant, cfg.fluids.empty() ? FluidMaterial{} : cfg.fluids[0].material,
                            fluid.p);
            pressure::pressure_accel(fluid, fluid.p, ff_, bref, accel_);
            for (size_t i = 0; i < fluid.size(); ++i)
                fluid.v[i] = v_pred_[i] + dt * accel_[i];
            accumulate_pressure_reactions();
        } else if (cfg.solver == SolverKind::Pcisph) {
            const Real m0 = fluid.m.empty() ? Real(1) : fluid.m[0];
            const Real k_pci = pressure::pcisph_stiffness(kp, cfg.particle_size, dt, m0, prm.rho0);
            const auto rep = pressure::pcisph_solve(fluid, v_pred_, ff_, bref, prm, k_pci, accel_);
            iters = rep.iterations;
            converged = rep.converged;
            for (size_t i = 0; i < fluid.size(); ++i)
                fluid.v[i] = v_pred_[i] + dt * accel_[i];
            accumulate_pressure_reactions();
        } else if (cfg.number_density_multiphase) { // IISPH on the adapted system
            const auto rep = pressure::iisph_solve_adapted(fluid, v_pred_, ff_, bref, prm, accel_);
            iters = rep.iterations;
            converged = rep.converged;
            for (size_t i = 0; i < fluid.size(); ++i)
                fluid.v[i] = v_pred_[i] + dt * accel_[i];
            accumulate_adapted_reactions();
        } else { // IISPH
            const auto rep = pressure::iisph_solve(fluid, v_pred_, ff_, bref, prm, accel_);
            iters = rep.iterations;
            converged = rep.converged;
            for (size_t i = 0; i < fluid.size(); ++i)
                fluid.v[i] = v_pred_[i] + dt * accel_[i];
            accumulate_pressure_reactions();
        }

        if (cfg.viscosity_mode == nonpressure::ViscosityMode::Xsph && cfg.xsph_alpha > Real(0)) {
            smooth_.resize(fluid.size());
            nonpressure::xsph(fluid, ff_, cfg.xsph_alpha, smooth_);
            fluid.v.assign(smooth_.begin(), smooth_.end());
        }
        for (size_t i = 0; i < fluid.size(); ++i)
            fluid.x[i] += dt * fluid.v[i];
        if (cfg.diffusion_alpha > Real(0) && !fluid.conc.empty())
            multiphase::diffuse_concentration(fluid, ff_, cfg.diffusion_alpha, dt);
        return dt;
    }

    Real dfsph_pipeline(int& iters, bool& converged) {
        if (!dfsph_ready_) {
            rebuild_search();
            compute_density();
            pressure::dfsph_factor(fluid, ff_, boundary_refs(), kdfsph_);
            dfsph_ready_ = true;
        }
        nonpressure_accels();
        const Real dt = cfl_dt(max_speed(), cfg.particle_size, cfg.cfl_lambda, cfg.dt_min, cfg.dt_max);
        predict_velocities(dt);
        pressure::Params prm = solver_params(dt);
        const auto rep_d = pressure::dfsph_constant_density_solve(fluid, v_pred_, ff_, boundary_refs(),
                                                                  kdfsph_, prm, 2, bnd_reaction_);
        for (size_t i = 0; i < fluid.size(); ++i)
            fluid.x[i] += dt * v_pred_[i];
        rebuild_search();
        compute_density();
        pressure::dfsph_factor(fluid, ff_, boundary_refs(), kdfsph_);
        const auto rep_v = pressure::dfsph_divergence_solve(fluid, v_pred_, ff_, boundary_refs(),
                                                            kdfsph_, prm, 1, bnd_reaction_);
        fluid.v.assign(v_pred_.begin(), v_pred_.end());
        if (cfg.viscosity_mode == nonpressure::ViscosityMode::Xsph && cfg.xsph_alpha > Real(0)) {
            smooth_.resize(fluid.size());
            nonpressure::xsph(fluid, ff_, cfg.xsph_alpha, smooth_);
            fluid.v.assign(smooth_.begin(), smooth_.end());
        }
        iters = rep_d.iterations + rep_v.iterations;
        converged = rep_d.converged && rep_v.converged;
        return dt;
    }

    void nonpressure_accels() {
        const Vec3 g = cfg.gravity;
        for (size_t i = 0; i < fluid.size(); ++i)
            accel_[i] = g;
        if (fluid.size() == 0) return;
        const Real mu0 = mu_i.empty() ? Real(0) : mu_i[0];
        if (cfg.viscosity_mode == nonpressure::ViscosityMode::ExplicitLaplacian && mu0 > Real(0)) {
            if (cfg.number_density_multiphase) {
                force_.assign(fluid.size(), Vec3::Zero());
                multiphase::adapted_viscosity_force(fluid, delta_, mu_i, ff_, force_);
                for (size_t i = 0; i < fluid.size(); ++i)
                    accel_[i] += force_[i] / fluid.m[i];
            } else {
                nonpressure::viscosity_explicit(fluid, ff_, mu0, kp, accel_);
            }
        }
        if (cfg.st_mode == nonpressure::SurfaceTensionMode::Becker)
            nonpressure::st_becker(fluid, ff_, cfg.fluids[0].material.alpha_st, accel_);
        else if (cfg.st_mode == nonpressure::SurfaceTensionMode::Akinci) {
            force_.assign(fluid.size(), Vec3::Zero());
            nonpressure::st_akinci(fluid, ff_, cfg.fluids[0].material.alpha_st, rho0_i[0], kp, force_);
            for (size_t i = 0; i < fluid.size(); ++i)
                accel_[i] += force_[i] / fluid.m[i];
        }
        if (bnd.size() && !cfg.fluids.empty() && cfg.fluids[0].material.beta_adh > Real(0)) {
            force_.assign(fluid.size(), Vec3::Zero());
            nonpressure::adhesion(fluid, bnd, fb_, cfg.fluids[0].material.beta_adh, kp, force_,
                                  bnd_reaction_);
            for (size_t i = 0; i < fluid.size(); ++i)
                accel_[i] += force_[i] / fluid.m[i];
        }
        if (cfg.vort_mode == nonpressure::VorticityMode::Confinement) {
            smooth_.resize(fluid.size());
            nonpressure::vorticity_confinement(fluid, ff_, cfg.fluids[0].material.eps_vort,
                                               cfg.xsph_alpha, accel_, smooth_);
            fluid.v.assign(smooth_.begin(), smooth_.end());
        } else if (cfg.vort_mode == nonpressure::VorticityMode::Micropolar) {
            force_.assign(fluid.size(), Vec3::Zero());
            torque_.assign(fluid.size(), Vec3::Zero());
            // dt of the upcoming step is not known yet when omega integrates;
            // the previous dt is a consistent explicit choice at CFL scale
            const Real dt_guess = last.dt > Real(0) ? last.dt : cfg.dt_max;
            nonpressure::micropolar_step(fluid, ff_, cfg.fluids[0].material.nu_t,
                                         cfg.fluids[0].material.micro_inertia, dt_guess, force_,
                                         torque_);
            for (size_t i = 0; i < fluid.size(); ++i)
                accel_[i] += force_[i] / fluid.m[i];
            smooth_.resize(fluid.size());
            const Real alpha = cfg.xsph_alpha > Real(0) ? cfg.xsph_alpha : Real(0.05);
            nonpressure::xsph(fluid, ff_, alpha, smooth_);
            fluid.v.assign(smooth_.begin(), smooth_.end());
        }
    }

    void predict_velocities(Real dt) {
        for (size_t i = 0; i < fluid.size(); ++i)
            v_pred_[i] = fluid.v[i] + dt * accel_[i];
        if (cfg.viscosity_mode == nonpressure::ViscosityMode::Implicit && !mu_i.empty() &&
            mu_i[0] > Real(0)) {
            visc_out_.resize(fluid.size());
            const auto rep = nonpressure::viscosity_implicit(
                fluid, v_pred_, ff_, bnd.size() ? &bnd : nullptr, bnd.size() ? &fb_ : nullptr,
                mu_i[0], cfg.mu_boundary, kp, dt, Real(1e-6), 200, visc_out_, warm_delta_,
                bnd_reaction_);
            (void)rep; // non-convergence is visible through the residual diagnostics
            for (size_t i = 0; i < fluid.size(); ++i) {
                warm_delta_[i] = visc_out_[i] - v_pred_[i];
                v_pred_[i] = visc_out_[i];
            }
        }
    }

    void adapted_pressure_stage(Real dt) {
        const size_t n = fluid.size();
        rho_t_.resize(n);
        p_t_.resize(n);
        // boundary-inclusive adapted number density: compute_density already
        // folded the pseudo-mass wall contribution into rho
        delta_eff_.resize(n);
        for (size_t i = 0; i < n; ++i)
            delta_eff_[i] = fluid.rho[i] / fluid.m[i];
        multiphase::adapted_density_pressure(fluid, delta_eff_, rho0_i, k1_i, k2_i, rho_t_, p_t_);
        force_.assign(n, Vec3::Zero());
        multiphase::adapted_pressure_force(fluid, delta_eff_, p_t_, ff_, force_);
        fluid.p.assign(p_t_.begin(), p_t_.end());
        for (size_t i = 0; i < n; ++i) {
            Vec3 fb_force = Vec3::Zero();
            const Real pi_term = p_t_[i] / (fluid.rho[i] * fluid.rho[i]);
            for (const auto& e : fb_.of(i))
                fb_force -=
                    gamma.gamma2 * fluid.m[i] * rho0_i[i] * bnd.volume[e.j] * pi_term * e.grad;
            fluid.v[i] = v_pred_[i] + dt * (force_[i] + fb_force) / fluid.m[i];
            for (const auto& e : fb_.of(i))
                bnd_reaction_[e.j] +=
                    gamma.gamma2 * fluid.m[i] * rho0_i[i] * bnd.volume[e.j] * pi_term * e.grad;
        }
    }

    void accumulate_adapted_reactions() {
        if (!bnd.size()) return;
        for (size_t i = 0; i < fluid.size(); ++i) {
            const Real pi_term = fluid.p[i] / (fluid.rho[i] * fluid.rho[i]);
            for (const auto& e : fb_.of(i))
                bnd_reaction_[e.j] +=
                    gamma.gamma2 * fluid.m[i] * rho0_i[i] * bnd.volume[e.j] * pi_term * e.grad;
        }
    }

    void accumulate_pressure_reactions() {
        if (!bnd.size()) return;
        for (size_t i = 0; i < fluid.size(); ++i) {
            const Real pi_term = fluid.p[i] / (fluid.rho[i] * fluid.rho[i]);
            for (const auto& e : fb_.of(i))
                bnd_reaction_[e.j] += gamma.gamma2 * fluid.m[i] * bnd.mass[e.j] * pi_term * e.grad;
        }
    }

    void substep_rigid_and_elastic(Real dt) {
        if (!rigids.bodies.empty()) {
            for (auto& b : rigids.bodies) {
                b.f_ext = b.is_static ? Vec3::Zero() : Vec3(b.mass * cfg.gravity);
                b.tau_ext = Vec3::Zero();
            }
            for (size_t s = n_static_bnd; s < bnd.size(); ++s) {
                const int32_t owner = bnd.owner[s];
                if (owner < 0) continue;
                auto& b = rigids.bodies[owner];
                b.f_ext += bnd_reaction_[s];
                b.tau_ext += (bnd.x[s] - b.com).cross(bnd_reaction_[s]);
            }
            rigid::rigid_pressure_solve(rigids, dt, cfg.max_iterations);
            rigid::integrate_bodies(rigids, dt);
            size_t s = n_static_bnd;
            for (size_t r = 0; r < rigids.sample_count(); ++r, ++s) {
                bnd.x[s] = rigids.x[r];
                const auto& b = rigids.bodies[rigids.body_of[r]];
                bnd.v[s] = b.is_static ? Vec3::Zero() : Vec3(b.v + b.w.cross(rigids.lever[r]));
            }
        }
        for (auto& body : solids) {
            const size_t n = body.size();
            elastic::deformation_gradient(body, body.x);
            solid_accel_.assign(n, Vec3::Zero());
            elastic::hourglass_force(body, body.x, body.material.hourglass_alpha, solid_accel_);
            solid_vpred_.resize(n);
            for (size_t i = 0; i < n; ++i)
                solid_vpred_[i] = body.v[i] + dt * (cfg.gravity + solid_accel_[i] / body.mass[i]);
            solid_vout_.resize(n);
            elastic::implicit_elastic_solve(body, solid_vpred_, dt, Real(1e-8), 500, solid_vout_);
            for (size_t i = 0; i < n; ++i) {
                body.v[i] = solid_vout_[i];
                body.x[i] += dt * body.v[i];
            }
        }
    }

    Real max_speed() const {
        Real vmax = 0;
        for (size_t i = 0; i < fluid.size(); ++i)
            vmax = std::max(vmax, fluid.v[i].norm());
        for (const auto& b : rigids.bodies)
            if (!b.is_static)
                for (const Vec3& s : b.samples_local)
                    vmax = std::max(vmax, (b.v + b.w.cross(b.orient.toRotationMatrix() * s)).norm());
        for (const auto& body : solids)
            for (const Vec3& v : body.v)
                vmax = std::max(vmax, v.norm());
        return vmax;
    }

    void maybe_zsort() {
        if (cfg.zsort_every <= 0 || step_count == 0 || step_count % cfg.zsort_every != 0) return;
        if (fluid.size() == 0) return;
        const NeighborGrid fg = NeighborGrid::build(fluid.x, kp.support);
        const std::vector<uint32_t> perm = zsort_permutation(fg, fluid.x);
        fluid.permute(perm);
        apply_permutation(phase, perm);
        apply_permutation(rho0_i, perm);
        apply_permutation(mu_i, perm);
        apply_permutation(k1_i, perm);
        apply_permutation(k2_i, perm);
        apply_permutation(warm_delta_, perm);
        apply_permutation(kdfsph_, perm);
        apply_permutation(v_pred_, perm); // crosses the mid-step rebuild in the DFSPH path
        apply_permutation(delta_, perm);
        phases.phase_id = phase;
    }

    void nan_check() const {
        for (size_t i = 0; i < fluid.size(); ++i)
            if (!fluid.x[i].allFinite() || !fluid.v[i].allFinite())
                throw NumericalError("non-finite fluid state at step " + std::to_string(step_count) +
                                     ", particle " + std::to_string(i));
        for (const auto& b : rigids.bodies)
            if (!b.com.allFinite() || !b.v.allFinite())
                throw NumericalError("non-finite rigid body state at step " +
                                     std::to_string(step_count));
        for (const auto& body : solids)
            for (size_t i = 0; i < body.size(); ++i)
                if (!body.x[i].allFinite())
                    throw NumericalError("non-finite solid state at step " +
                                         std::to_string(step_count) + ", particle " +
                                         std::to_string(i));
    }

    void fill_diagnostics(Real dt, int iters, bool converged,
                          std::chrono::steady_clock::time_point t0) {
        last.step = step_count;
        last.time = time;
        last.dt = dt;
        last.solver_iterations = iters;
        last.solver_converged = converged;
        Real avg = 0, mx = 0, ke = 0;
        Vec3 mom = Vec3::Zero();
        for (size_t i = 0; i < fluid.size(); ++i) {
            const Real err = std::abs(fluid.rho[i] - rho0_i[i]) / rho0_i[i];
            avg += err;
            mx = std::max(mx, err);
            ke += Real(0.5) * fluid.m[i] * fluid.v[i].squaredNorm();
            mom += fluid.m[i] * fluid.v[i];
        }
        last.avg_density_err_pct = fluid.size() ? Real(100) * avg / Real(fluid.size()) : Real(0);
        last.max_density_err_pct = Real(100) * mx;
        last.kinetic_energy = ke;
        last.momentum = mom;
        last.wall_time_s =
            std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
    }

    NeighborGrid grid_;
    Neighborhood ff_, fb_;
    std::vector<Vec3> all_pos_;
    std::vector<Vec3> accel_, v_pred_, warm_delta_, visc_out_, force_, torque_, smooth_;
    std::vector<Vec3> bnd_reaction_;
    std::vector<Vec3> solid_accel_, solid_vpred_, solid_vout_;
    std::vector<Real> kdfsph_, delta_, delta_eff_, rho_t_, p_t_;
    bool dfsph_ready_ = false;
};

/// Binary frame: magic "SPHF", u32 version, u64 particle count, f64 sim time,
/// then contiguous little-endian f32 arrays x, v, rho, p.
inline void export_frame(const std::string& path, const ParticleSet& fluid, Real time) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("frame export failed: cannot open " + path);
    const char magic[4] = {'S', 'P', 'H', 'F'};
    const uint32_t version = 1;
    const uint64_t count = fluid.size();
    const double t = time;
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(&t), 8);
    std::vector<float> buf;
    buf.reserve(3 * count);
    auto flush = [&] {
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        buf.clear();
    };
    for (const Vec3& v : fluid.x)
        for (int d = 0; d < 3; ++d)
            buf.push_back(static_cast<float>(v[d]));
    flush();
    for (const Vec3& v : fluid.v)
        for (int d = 0; d < 3; ++d)
            buf.push_back(static_cast<float>(v[d]));
    flush();
    for (Real r : fluid.rho)
        buf.push_back(static_cast<float>(r));
    flush();
    for (Real r : fluid.p)
        buf.push_back(static_cast<float>(r));
    flush();
    if (!out) throw std::runtime_error("frame export failed: write error on " + path);
}

inline std::string frame_path(const std::string& dir, int index) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.sphf", index);
    return dir + "/" + name;
}

/// Runs a loaded world for the requested number of frames, writing frames and
/// an append-only per-step diagnostics CSV into out_dir.
inline void run_simulation(World& world, int frames, Real fps, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/diagnostics.csv");
    if (!csv) throw std::runtime_error("cannot open " + out_dir + "/diagnostics.csv");
    csv << "step,time,avg_density_err_pct,max_density_err_pct,kinetic_energy,"
           "momentum_x,momentum_y,momentum_z,solver_iterations,solver_converged,dt,wall_time\n";
    export_frame(frame_path(out_dir, 0), world.fluid, world.time);
    int exported = 1;
    while (exported < frames) {
        world.step();
        const auto& d = world.last;
        csv << d.step << ',' << d.time << ',' << d.avg_density_err_pct << ','
            << d.max_density_err_pct << ',' << d.kinetic_energy << ',' << d.momentum[0] << ','
            << d.momentum[1] << ',' << d.momentum[2] << ',' << d.solver_iterations << ','
            << (d.solver_converged ? 1 : 0) << ',' << d.dt << ',' << d.wall_time_s << '\n';
        while (exported < frames && world.time >= Real(exported) / fps) {
            export_frame(frame_path(out_dir, exported), world.fluid, world.time);
            ++exported;
        }
    }
}

} // namespace sphlite::sim
