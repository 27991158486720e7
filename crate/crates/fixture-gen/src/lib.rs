//! Deterministic synthetic fixture for the panelcause pipeline.
//!
//! League cells are fixed tables. Player seasons come from a latent-talent
//! model (player level, aging curve, league shocks, one common factor and
//! iid noise) with known effects added to high-shift players from 2023 on.
//! Named players carry real names so reports read naturally, but every
//! number for them is simulated.

// League rate tables include values such as .318 that clippy mistakes for 1/pi.
#![allow(clippy::approx_constant)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use panelcause_core::ingest::{write_player_seasons, LEAGUE_SPLITS_HEADER, SHIFT_RATES_HEADER};
use panelcause_core::panel::validate_panel;
use panelcause_core::{PlayerId, PlayerSeason, Result, Season};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DEFAULT_SEED: u64 = 2023;

pub const LEAGUE_FILE: &str = "league_splits.csv";
pub const PLAYER_FILE: &str = "player_seasons.csv";
pub const SHIFT_FILE: &str = "shift_rates.csv";

const YEARS: [u16; 9] = [2015, 2016, 2017, 2018, 2019, 2021, 2022, 2023, 2024];

struct LeagueColumn {
    l: [f64; 9],
    r: [f64; 9],
}

// babip, obp, avg, slg, woba, bb_pct, k_pct (ops is obp + slg)
const BABIP: LeagueColumn = LeagueColumn {
    l: [0.290, 0.292, 0.289, 0.284, 0.288, 0.283, 0.275, 0.287, 0.289],
    r: [0.297, 0.298, 0.296, 0.292, 0.295, 0.293, 0.291, 0.294, 0.295],
};
const OBP: LeagueColumn = LeagueColumn {
    l: [0.3160, 0.3180, 0.3150, 0.3140, 0.3180, 0.3060, 0.2994, 0.3146, 0.3126],
    r: [0.3200, 0.3210, 0.3190, 0.3150, 0.3180, 0.3070, 0.3030, 0.3090, 0.3080],
};
const AVG: LeagueColumn = LeagueColumn {
    l: [0.243, 0.246, 0.244, 0.240, 0.244, 0.236, 0.229, 0.241, 0.240],
    r: [0.250, 0.252, 0.251, 0.246, 0.250, 0.244, 0.240, 0.245, 0.244],
};
const SLG: LeagueColumn = LeagueColumn {
    l: [0.418, 0.425, 0.430, 0.420, 0.432, 0.410, 0.392, 0.412, 0.410],
    r: [0.405, 0.410, 0.416, 0.408, 0.420, 0.404, 0.395, 0.406, 0.405],
};
const WOBA: LeagueColumn = LeagueColumn {
    l: [0.312, 0.316, 0.316, 0.312, 0.318, 0.305, 0.296, 0.310, 0.308],
    r: [0.313, 0.316, 0.317, 0.312, 0.318, 0.308, 0.302, 0.307, 0.306],
};
const BB_PCT: LeagueColumn = LeagueColumn {
    l: [0.092, 0.090, 0.093, 0.094, 0.093, 0.091, 0.089, 0.094, 0.092],
    r: [0.078, 0.077, 0.080, 0.081, 0.080, 0.079, 0.078, 0.078, 0.078],
};
const K_PCT: LeagueColumn = LeagueColumn {
    l: [0.200, 0.205, 0.210, 0.216, 0.220, 0.226, 0.222, 0.223, 0.222],
    r: [0.205, 0.210, 0.215, 0.221, 0.225, 0.232, 0.228, 0.228, 0.228],
};
const PA_SHARE: LeagueColumn = LeagueColumn {
    l: [0.228, 0.229, 0.231, 0.230, 0.232, 0.231, 0.230, 0.233, 0.232],
    r: [0.345, 0.344, 0.342, 0.343, 0.341, 0.344, 0.345, 0.342, 0.343],
};
const LEAGUE_PA: [u32; 9] = [184_000, 184_500, 185_300, 185_100, 186_500, 182_800, 182_000, 184_100, 183_400];

/// `league_splits.csv` contents.
pub fn league_csv() -> String {
    let mut out = String::new();
    writeln!(out, "{LEAGUE_SPLITS_HEADER}").unwrap();
    for (i, year) in YEARS.iter().enumerate() {
        for (hand, pick) in [("L", 0usize), ("R", 1)] {
            let cell = |c: &LeagueColumn| if pick == 0 { c.l[i] } else { c.r[i] };
            let share = cell(&PA_SHARE);
            let pa = (LEAGUE_PA[i] as f64 * share).round() as u32;
            let ops = cell(&OBP) + cell(&SLG);
            writeln!(
                out,
                "{year},{hand},bases_empty,{pa},{share:.4},{:.4},{:.4},{:.4},{:.4},{ops:.4},{:.4},{:.4},{:.4}",
                cell(&BABIP),
                cell(&OBP),
                cell(&AVG),
                cell(&SLG),
                cell(&WOBA),
                cell(&BB_PCT),
                cell(&K_PCT),
            )
            .unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Target,
    Control,
    InUnit,
    Medium,
    /// High shift rate, misses the 2023 gate but plays a full 2024.
    LateHigh,
    /// Short 2022 season; never passes a gate.
    Bench,
}

/// Targets: name, 2022 shift rate, 2023 effects on OBP, OPS and wOBA.
const TARGETS: [(&str, f64, f64, f64, f64); 30] = [
    ("Corey Seager", 0.928, 0.085, 0.271, 0.115),
    ("Kyle Tucker", 0.909, 0.047, 0.097, 0.034),
    ("Kyle Schwarber", 0.907, 0.018, 0.061, 0.026),
    ("Cody Bellinger", 0.905, 0.041, 0.130, 0.047),
    ("Joey Gallo", 0.900, -0.001, 0.037, 0.018),
    ("Max Kepler", 0.897, 0.023, 0.096, 0.044),
    ("Max Muncy", 0.890, 0.005, -0.026, -0.005),
    ("Seth Brown", 0.886, -0.035, -0.043, -0.021),
    ("Shohei Ohtani", 0.883, 0.076, 0.241, 0.083),
    ("Yordan Alvarez", 0.881, 0.015, 0.214, 0.083),
    ("Brandon Lowe", 0.853, 0.012, 0.078, 0.033),
    ("Brandon Belt", 0.852, 0.044, 0.115, 0.047),
    ("Eddie Rosario", 0.836, 0.001, 0.001, 0.003),
    ("Cavan Biggio", 0.828, 0.015, 0.030, 0.013),
    ("Anthony Rizzo", 0.826, -0.005, -0.050, -0.013),
    ("Matt Olson", 0.813, 0.075, 0.222, 0.085),
    ("Mike Yastrzemski", 0.812, 0.009, 0.078, 0.034),
    ("Eugenio Suárez", 0.809, 0.002, -0.077, -0.013),
    ("Byron Buxton", 0.788, -0.022, 0.074, 0.020),
    ("Rowdy Tellez", 0.784, -0.024, -0.083, -0.017),
    ("Carlos Santana", 0.782, -0.004, 0.021, 0.005),
    ("Jorge Soler", 0.780, 0.021, 0.081, 0.028),
    ("José Ramírez", 0.773, 0.058, 0.109, 0.046),
    ("Josh Naylor", 0.771, 0.031, 0.136, 0.047),
    ("Joc Pederson", 0.770, 0.024, -0.006, 0.001),
    ("Daniel Vogelbach", 0.764, 0.000, -0.013, -0.040),
    ("Bryce Harper", 0.757, 0.043, 0.094, 0.040),
    ("Salvador Perez", 0.756, -0.020, 0.049, 0.017),
    ("Marcus Semien", 0.753, 0.022, 0.158, 0.037),
    ("Ozzie Albies", 0.751, 0.030, 0.165, 0.063),
];

/// Named low-shift players; the rest of the control cohort is numbered.
const NAMED_CONTROLS: [&str; 7] =
    ["Starling Marte", "Carlos Correa", "Trea Turner", "Jean Segura", "Yan Gomes", "Paul Goldschmidt", "José Abreu"];

const N_CONTROLS: usize = 58;
/// Controls with a qualifying 2024 season.
const N_CONTROLS_2024: usize = 42;
const N_IN_UNIT: usize = 25;
const N_MEDIUM: usize = 40;
const N_BENCH: usize = 12;

struct Plan {
    id: String,
    name: String,
    role: Role,
    shift_rate: f64,
    effects: [f64; 3],
    birth_year: u16,
    /// Forced PA by season; other seasons are drawn.
    fixed_pa: Vec<(u16, Option<u32>)>,
    debut: u16,
}

fn slug(name: &str) -> String {
    let mut s = String::new();
    for c in name.chars() {
        let c = match c {
            'á' => 'a',
            'é' => 'e',
            'í' => 'i',
            'ó' => 'o',
            'ú' => 'u',
            c => c,
        };
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('-') {
            s.push('-');
        }
    }
    s
}

fn plans(rng: &mut ChaCha8Rng) -> Vec<Plan> {
    let mut plans = Vec::new();
    let mut push = |rng: &mut ChaCha8Rng, id: String, name: String, role: Role, rate: f64, effects: [f64; 3]| {
        let birth_year = rng.gen_range(1985..=1997);
        // Half the league has been around since at least 2015.
        let debut = if rng.gen_bool(0.5) { 2015 } else { YEARS[rng.gen_range(1..5)] };
        let debut = debut.max(birth_year + 21);
        plans.push(Plan { id, name, role, shift_rate: rate, effects, birth_year, fixed_pa: Vec::new(), debut });
    };

    for &(name, rate, obp, ops, woba) in &TARGETS {
        push(rng, slug(name), name.to_string(), Role::Target, rate, [obp, ops, woba]);
    }
    for i in 0..N_CONTROLS {
        let (id, name) = match NAMED_CONTROLS.get(i) {
            Some(name) => (slug(name), name.to_string()),
            None => (format!("control-{i:02}"), format!("Control {i:02}")),
        };
        let rate = if i == N_CONTROLS - 1 { 0.15 } else { rng.gen_range(0.005..0.15) };
        push(rng, id, name, Role::Control, rate, [0.0; 3]);
    }
    for i in 0..N_IN_UNIT {
        let rate = if i == 0 { 0.30 } else { rng.gen_range(0.151..0.30) };
        push(rng, format!("in-unit-{i:02}"), format!("In-Unit {i:02}"), Role::InUnit, rate, [0.0; 3]);
    }
    for i in 0..N_MEDIUM {
        let rate = rng.gen_range(0.301..0.749);
        push(rng, format!("medium-{i:02}"), format!("Medium {i:02}"), Role::Medium, rate, [0.0; 3]);
    }
    push(rng, "late-high-00".into(), "Late High 00".into(), Role::LateHigh, 0.802, [0.0; 3]);
    for i in 0..N_BENCH {
        let rate = rng.gen_range(0.0..0.95);
        push(rng, format!("bench-{i:02}"), format!("Bench {i:02}"), Role::Bench, rate, [0.0; 3]);
    }

    for plan in &mut plans {
        match plan.role {
            Role::Target => match plan.name.as_str() {
                "Corey Seager" => {
                    plan.birth_year = 1994;
                    plan.debut = 2015;
                    plan.fixed_pa = vec![
                        (2015, Some(113)),
                        (2016, Some(687)),
                        (2017, Some(613)),
                        (2018, Some(115)),
                        (2019, Some(541)),
                        (2021, Some(409)),
                        (2022, Some(663)),
                        (2023, Some(536)),
                        (2024, Some(570)),
                    ];
                }
                "Brandon Belt" => plan.fixed_pa = vec![(2024, None)],
                "Daniel Vogelbach" => plan.fixed_pa = vec![(2024, Some(204))],
                "Cavan Biggio" => plan.fixed_pa = vec![(2024, Some(231))],
                _ => {}
            },
            Role::LateHigh => plan.fixed_pa = vec![(2023, Some(181)), (2024, Some(452))],
            Role::Bench => plan.fixed_pa = vec![(2022, Some(120 + (plan.birth_year as u32 % 7) * 15))],
            _ => {}
        }
    }
    // Controls past the first 42 lose their 2024 season: half retire, half play part time.
    let controls: Vec<usize> = (0..plans.len()).filter(|&i| plans[i].role == Role::Control).collect();
    for (k, &i) in controls.iter().enumerate().skip(N_CONTROLS_2024) {
        plans[i].fixed_pa = vec![(2024, if k % 2 == 0 { None } else { Some(140 + k as u32) })];
    }
    // The named donors have every season.
    for &i in controls.iter().take(NAMED_CONTROLS.len()) {
        plans[i].debut = 2015;
        plans[i].fixed_pa.extend(YEARS.iter().filter(|&&y| y < 2020).map(|&y| (y, Some(480 + (y as u32 % 9) * 20))));
    }
    plans
}

fn season_pa(plan: &Plan, year: u16, rng: &mut ChaCha8Rng) -> Option<u32> {
    let draw_full = rng.gen_range(300..=690);
    let draw_part = rng.gen_range(60..=240);
    let part_time = rng.gen_bool(0.2);
    if let Some(&(_, pa)) = plan.fixed_pa.iter().find(|(y, _)| *y == year) {
        return pa;
    }
    if year < plan.debut {
        return None;
    }
    let always_full = matches!(year, 2021..=2023) || (year == 2024 && matches!(plan.role, Role::Target | Role::Control));
    Some(if always_full || !part_time { draw_full } else { draw_part })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// League-wide shocks shared by every player, by index into `YEARS`.
const OBP_SHOCK: [f64; 9] = [0.002, 0.004, 0.001, -0.003, 0.001, -0.006, -0.010, 0.000, -0.001];

fn simulate(plan: &Plan, rng: &mut ChaCha8Rng, factor: &[f64; 9]) -> Vec<PlayerSeason> {
    let n = |sd: f64| Normal::new(0.0, sd).unwrap();
    let talent_obp = 0.325 + n(0.022).sample(rng);
    let talent_slg = 0.425 + 0.9 * (talent_obp - 0.325) + n(0.045).sample(rng);
    let talent_bb = (0.088 + 0.6 * (talent_obp - 0.325) + n(0.022).sample(rng)).clamp(0.03, 0.20);
    let talent_k = (0.215 + n(0.045).sample(rng)).clamp(0.08, 0.36);
    let loading = n(1.0).sample(rng);

    let mut out = Vec::new();
    for (i, &year) in YEARS.iter().enumerate() {
        let noise = [n(0.009).sample(rng), n(0.020).sample(rng), n(0.003).sample(rng), n(0.008).sample(rng), n(0.012).sample(rng)];
        let Some(pa) = season_pa(plan, year, rng) else { continue };
        let age = year - plan.birth_year;
        let years_from_peak = age as f64 - 28.0;
        let treated = year >= 2023;
        let [e_obp, e_ops, e_woba] = if treated { plan.effects } else { [0.0; 3] };

        let obp0 = talent_obp - 0.0004 * years_from_peak.powi(2) + OBP_SHOCK[i] + loading * factor[i] + noise[0];
        let slg0 = talent_slg - 0.0010 * years_from_peak.powi(2) + 2.5 * OBP_SHOCK[i] + 1.5 * loading * factor[i] + noise[1];
        let woba0 = 0.72 * obp0 + 0.30 * slg0 - 0.04 + noise[2];
        let bb = round3((talent_bb + noise[3]).clamp(0.02, 0.25));
        let k = round3((talent_k + noise[4]).clamp(0.05, 0.40));

        let obp = round3((obp0 + e_obp).clamp(0.18, 0.50));
        let slg = round3((slg0 + e_ops - e_obp).clamp(0.20, 0.75));
        let woba = round3((woba0 + e_woba).clamp(0.18, 0.50));
        let ops = round3(obp + slg);

        let pa_f = pa as f64;
        let at_bats = pa_f * (1.0 - bb - 0.016);
        let hits = ((pa_f * (obp - bb - 0.008)).round().max(1.0) as u32).min(pa);
        let avg = hits as f64 / at_bats;
        let iso = (slg - avg).max(0.04);
        let home_runs = ((at_bats * iso * 0.28).round() as u32).min(hits);
        let extra_bases = (at_bats * iso - 3.0 * home_runs as f64).max(0.0);
        let doubles = ((extra_bases / 1.05).round() as u32).min(hits - home_runs);
        let singles = hits - home_runs - doubles;

        out.push(PlayerSeason {
            player_id: PlayerId::new(plan.id.clone()),
            name: plan.name.clone(),
            season: Season::new(year).unwrap(),
            age: age as u32,
            pa,
            hits,
            singles,
            home_runs,
            bb_pct: bb,
            k_pct: k,
            obp,
            ops,
            woba,
        });
    }
    out
}

/// The three fixture files as strings.
pub struct Fixture {
    pub league_splits: String,
    pub player_seasons: String,
    pub shift_rates: String,
}

pub fn generate(seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans = plans(&mut rng);
    let factor_sd = Normal::new(0.0, 0.006).unwrap();
    let factor: [f64; 9] = std::array::from_fn(|_| factor_sd.sample(&mut rng));

    let mut records = Vec::new();
    let mut shifts = String::new();
    writeln!(shifts, "{SHIFT_RATES_HEADER}").unwrap();
    let mut sorted: Vec<&Plan> = plans.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for plan in &plans {
        records.extend(simulate(plan, &mut rng, &factor));
    }
    for plan in sorted {
        let rate_2021 = (plan.shift_rate + Normal::new(0.0, 0.04).unwrap().sample(&mut rng)).clamp(0.0, 1.0);
        writeln!(shifts, "{},2021,{rate_2021:.3}", plan.id).unwrap();
        writeln!(shifts, "{},2022,{:.3}", plan.id, plan.shift_rate).unwrap();
    }

    let panel = validate_panel(records)?;
    let mut players = Vec::new();
    write_player_seasons(&panel, &mut players)?;
    Ok(Fixture {
        league_splits: league_csv(),
        player_seasons: String::from_utf8(players).expect("csv output is utf-8"),
        shift_rates: shifts,
    })
}

impl Fixture {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(LEAGUE_FILE), &self.league_splits)?;
        fs::write(dir.join(PLAYER_FILE), &self.player_seasons)?;
        fs::write(dir.join(SHIFT_FILE), &self.shift_rates)
    }
}
