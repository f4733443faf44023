//! Window length from deflection decay, and windowed datasets for training.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{generate_trajectories, Batch, Excitation, Generator, Trajectory, CHANNELS};
use crate::error::{Error, Result};

pub const S_U: f64 = 1.0;
/// Cylinder plus piston length.
pub const S_S: f64 = 1.355;
pub const S_SDOT: f64 = 6.67;
pub const S_P: f64 = 2e7;
/// Strain sensor range expressed as tip deflection.
pub const S_DELTA: f64 = 0.030;

pub const SENSORS_5: [&str; 5] = ["U", "s", "sdot", "p1", "p2"];
pub const SENSORS_2: [&str; 2] = ["U", "s"];
pub const PROBE_BATCH: usize = 20;

/// Scale factor of a recorded channel.
pub fn channel_scale(name: &str) -> Result<f64> {
    match name {
        "U" => Ok(S_U),
        "s" => Ok(S_S),
        "sdot" => Ok(S_SDOT),
        "p1" | "p2" => Ok(S_P),
        "delta_y" => Ok(S_DELTA),
        _ => Err(Error::InvalidArgument(format!("unknown channel '{name}'"))),
    }
}

/// Valve fully open for the first fifth of the run, closed afterwards.
pub fn decay_probe_signal(n_steps: usize) -> Result<Vec<f64>> {
    if n_steps < 10 {
        return Err(Error::InvalidArgument(format!("probe needs >= 10 steps, got {n_steps}")));
    }
    let open = n_steps / 5;
    Ok((0..n_steps).map(|i| if i < open { 1.0 } else { 0.0 }).collect())
}

/// 5% above the signed mean.
pub fn settle_threshold(delta: &[f64]) -> f64 {
    1.05 * delta.iter().sum::<f64>() / delta.len() as f64
}

/// Steps until the deflection stays below the threshold for a tenth of the run.
pub fn slide_window_one(delta: &[f64]) -> Result<usize> {
    let n = delta.len();
    if n < 20 {
        return Err(Error::InvalidArgument(format!("series needs >= 20 samples, got {n}")));
    }
    let limit = settle_threshold(delta).abs();
    let run = n / 10;
    let mut streak = 0;
    for (i, d) in delta.iter().enumerate() {
        if d.abs() < limit {
            streak += 1;
            if streak == run {
                return Ok(i);
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::NoSettle { threshold: limit, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideWindow {
    pub steps: usize,
    pub seconds: f64,
    pub per_sample: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Samples that never settled and count as the full horizon.
    pub no_settle: usize,
}

/// Average of the per-sample windows, rounded half up.
pub fn slide_window_avg(samples: &[Vec<f64>], dt: f64) -> Result<SlideWindow> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples for the window estimate".into()));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut thresholds = Vec::with_capacity(samples.len());
    let mut no_settle = 0;
    for (i, delta) in samples.iter().enumerate() {
        thresholds.push(settle_threshold(delta));
        match slide_window_one(delta) {
            Ok(t) => per_sample.push(t),
            Err(e @ Error::NoSettle { .. }) => {
                log::warn!("sample {i}: {e}; using the full horizon");
                no_settle += 1;
                per_sample.push(delta.len());
            }
            Err(e) => return Err(e),
        }
    }
    if 2 * no_settle > samples.len() {
        return Err(Error::NoSettle {
            threshold: thresholds.iter().map(|t| t.abs()).fold(0.0, f64::max),
            n: samples[0].len(),
        });
    }
    let mean = per_sample.iter().sum::<usize>() as f64 / per_sample.len() as f64;
    let steps = (mean + 0.5).floor() as usize;
    Ok(SlideWindow {
        steps,
        seconds: steps as f64 * dt,
        per_sample,
        thresholds,
        no_settle,
    })
}

/// Runs the decay probe on `n` fresh trajectories.
pub fn probe_trajectories(generator: &Generator, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    generate_trajectories(n, seed, generator, Excitation::DecayProbe)
}

/// Window length for a generator's payload from a probe batch.
pub fn probe_window(generator: &Generator, n: usize, seed: u64) -> Result<SlideWindow> {
    let probes = probe_trajectories(generator, n, seed)?;
    let samples: Vec<Vec<f64>> = probes
        .iter()
        .map(|t| t.channels[5].iter().map(|&v| v as f64).collect())
        .collect();
    slide_window_avg(&samples, generator.integrator.dt)
}

/// Scaled windows: `x` rows hold `t_d` steps of each sensor, channel-major;
/// `y` rows hold the deflection at steps `t_d ..= t_d + k` after the window start.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideDataset {
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub n_samples: usize,
    /// Trajectories the windows were cut from.
    pub n_trajectories: usize,
    pub t_d: usize,
    pub k: usize,
    pub sensors: Vec<String>,
    pub scale_x: Vec<f64>,
    pub scale_y: f64,
}

impl SlideDataset {
    pub fn n_inputs(&self) -> usize {
        self.sensors.len() * self.t_d
    }

    pub fn n_outputs(&self) -> usize {
        self.k + 1
    }

    pub fn x_row(&self, i: usize) -> &[f32] {
        let w = self.n_inputs();
        &self.x[i * w..(i + 1) * w]
    }

    pub fn y_row(&self, i: usize) -> &[f32] {
        let w = self.n_outputs();
        &self.y[i * w..(i + 1) * w]
    }

    /// Raw sensor values of row `i`.
    pub fn unscale_x(&self, i: usize) -> Vec<f32> {
        self.x_row(i)
            .chunks(self.t_d)
            .zip(&self.scale_x)
            .flat_map(|(c, &s)| c.iter().map(move |&v| unscale(v, s)))
            .collect()
    }

    fn empty(t_d: usize, k: usize, sensors: &[String]) -> Result<Self> {
        let scale_x = sensors.iter().map(|s| channel_scale(s)).collect::<Result<_>>()?;
        Ok(Self {
            x: Vec::new(),
            y: Vec::new(),
            n_samples: 0,
            n_trajectories: 0,
            t_d,
            k,
            sensors: sensors.to_vec(),
            scale_x,
            scale_y: S_DELTA,
        })
    }

    fn push_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let n = traj.n_steps();
        let cols: Vec<&[f32]> = self
            .sensors
            .iter()
            .map(|s| traj.channel(s).ok_or_else(|| Error::InvalidArgument(format!("missing channel {s}"))))
            .collect::<Result<_>>()?;
        let delta = &traj.channels[5];
        let count = n - self.t_d - self.k;
        for i in 0..count {
            for (c, &s) in cols.iter().zip(&self.scale_x) {
                self.x.extend(c[i..i + self.t_d].iter().map(|&v| scale(v, s)));
            }
            let start = i + self.t_d;
            self.y
                .extend(delta[start..=start + self.k].iter().map(|&v| scale(v, self.scale_y)));
        }
        self.n_samples += count;
        self.n_trajectories += 1;
        Ok(())
    }
}

pub fn scale(v: f32, s: f64) -> f32 {
    (v as f64 / s) as f32
}

pub fn unscale(v: f32, s: f64) -> f32 {
    (v as f64 * s) as f32
}

pub fn sensor_preset(count: usize) -> Result<Vec<String>> {
    match count {
        5 => Ok(SENSORS_5.iter().map(|s| s.to_string()).collect()),
        2 => Ok(SENSORS_2.iter().map(|s| s.to_string()).collect()),
        _ => Err(Error::InvalidArgument(format!("sensor preset must be 2 or 5, got {count}"))),
    }
}

/// Train and validation windows of a batch.
pub fn arrange_dataset(batch: &Batch, t_d: usize, k: usize, sensors: &[String]) -> Result<(SlideDataset, SlideDataset)> {
    if sensors.is_empty() {
        return Err(Error::InvalidArgument("empty sensor set".into()));
    }
    if t_d == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    for s in sensors {
        if !CHANNELS[..5].contains(&s.as_str()) {
            return Err(Error::InvalidArgument(format!("'{s}' is not an input sensor")));
        }
    }
    let n = batch.n_steps();
    if t_d + k >= n {
        return Err(Error::InsufficientHorizon {
            n_steps: n,
            needed: t_d + k + 1,
        });
    }
    let mut train = SlideDataset::empty(t_d, k, sensors)?;
    let mut val = train.clone();
    for t in batch.train_trajectories() {
        train.push_trajectory(t)?;
    }
    for t in batch.validation_trajectories() {
        val.push_trajectory(t)?;
    }
    Ok((train, val))
}

const SLDX_MAGIC: &[u8; 4] = b"SLDX";
const SLDX_VERSION: u32 = 1;

/// Writes train and validation sets sharing one header.
pub fn write_sldx<W: Write>(mut w: W, train: &SlideDataset, val: &SlideDataset) -> Result<()> {
    if train.t_d != val.t_d || train.k != val.k || train.sensors != val.sensors {
        return Err(Error::Format("train and validation layouts differ".into()));
    }
    w.write_all(SLDX_MAGIC)?;
    for v in [
        SLDX_VERSION,
        train.t_d as u32,
        train.k as u32,
        train.sensors.len() as u32,
        train.n_samples as u32,
        val.n_samples as u32,
        train.n_trajectories as u32,
        val.n_trajectories as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for name in &train.sensors {
        w.write_all(&[name.len() as u8])?;
        w.write_all(name.as_bytes())?;
    }
    for s in train.scale_x.iter().chain([&train.scale_y]) {
        w.write_all(&s.to_le_bytes())?;
    }
    for block in [&train.x, &train.y, &val.x, &val.y] {
        let mut buf = Vec::with_capacity(block.len() * 4);
        for v in block.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_sldx<R: Read>(mut r: R) -> Result<(SlideDataset, SlideDataset)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SLDX_MAGIC {
        return Err(Error::Format("not a .sldx file".into()));
    }
    let mut u32s = [0u32; 8];
    for v in u32s.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, t_d, k, n_sensors, n_train, n_val, traj_train, traj_val] = u32s.map(|v| v as usize);
    if version != SLDX_VERSION as usize {
        return Err(Error::Format(format!("unsupported .sldx version {version}")));
    }
    let mut sensors = Vec::with_capacity(n_sensors);
    for _ in 0..n_sensors {
        let mut len = [0u8; 1];
        r.read_exact(&mut len)?;
        let mut name = vec![0u8; len[0] as usize];
        r.read_exact(&mut name)?;
        sensors.push(String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?);
    }
    let mut scales = Vec::with_capacity(n_sensors + 1);
    for _ in 0..=n_sensors {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        scales.push(f64::from_le_bytes(b));
    }
    let scale_y = scales.pop().unwrap();
    let mut read_block = |len: usize| -> Result<Vec<f32>> {
        let mut buf = vec![0u8; len * 4];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let (nx, ny) = (n_sensors * t_d, k + 1);
    let mut sets = Vec::with_capacity(2);
    for (n, n_traj) in [(n_train, traj_train), (n_val, traj_val)] {
        let x = read_block(n * nx)?;
        let y = read_block(n * ny)?;
        sets.push(SlideDataset {
            x,
            y,
            n_samples: n,
            n_trajectories: n_traj,
            t_d,
            k,
            sensors: sensors.clone(),
            scale_x: scales.clone(),
            scale_y,
        });
    }
    let val = sets.pop().unwrap();
    let train = sets.pop().unwrap();
    Ok((train, val))
}

pub fn save_sldx(path: &Path, train: &SlideDataset, val: &SlideDataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_sldx(std::io::BufWriter::new(file), train, val)
}

pub fn load_sldx(path: &Path) -> Result<(SlideDataset, SlideDataset)> {
    let file = std::fs::File::open(path)?;
    read_sldx(std::io::BufReader::new(file))
}
