//! Binary checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! "SACK"  u16 version
//! u32 n, n bytes   SacConfig as TOML
//! u32 obs_dim, u32 act_dim
//! u64 episodes, u64 total_strides, u64 updates
//! f64 log_alpha
//! u32 network count, then per network:
//!   u8 n, n bytes name, u32 layers, per layer:
//!     u32 rows, u32 cols, rows*cols f64 weights (row-major), cols f64 biases
//! u32 optimiser count, then per optimiser:
//!   u8 n, n bytes name, u64 step, u32 len, len f64 first moments, len f64 second moments
//! ```

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Adam, Agent, Layer, Mlp, SacConfig, SacError};

pub const MAGIC: &[u8; 4] = b"SACK";
pub const VERSION: u16 = 1;

const NETWORKS: [&str; 5] = ["actor", "q1", "q2", "q1_target", "q2_target"];
const OPTIMISERS: [&str; 4] = ["actor", "q1", "q2", "alpha"];

/// Training progress stored alongside the parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Progress {
    pub episodes: u64,
    pub total_strides: u64,
}

fn corrupt(msg: impl Into<String>) -> SacError {
    SacError::Checkpoint(msg.into())
}

fn write_name<W: Write>(w: &mut W, name: &str) -> std::io::Result<()> {
    w.write_u8(name.len() as u8)?;
    w.write_all(name.as_bytes())
}

fn read_name<R: Read>(r: &mut R) -> Result<String, SacError> {
    let n = r.read_u8()? as usize;
    let mut buf = vec![0; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| corrupt("name is not UTF-8"))
}

fn write_f64s<'a, W: Write>(w: &mut W, values: impl Iterator<Item = &'a f64>) -> std::io::Result<()> {
    for v in values {
        w.write_f64::<LE>(*v)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, SacError> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

fn write_network<W: Write>(w: &mut W, name: &str, net: &Mlp) -> std::io::Result<()> {
    write_name(w, name)?;
    w.write_u32::<LE>(net.layers().len() as u32)?;
    for layer in net.layers() {
        w.write_u32::<LE>(layer.w.nrows() as u32)?;
        w.write_u32::<LE>(layer.w.ncols() as u32)?;
        write_f64s(w, layer.w.iter())?;
        write_f64s(w, layer.b.iter())?;
    }
    Ok(())
}

fn read_network<R: Read>(r: &mut R, name: &str, expected: &[usize]) -> Result<Mlp, SacError> {
    let found = read_name(r)?;
    if found != name {
        return Err(corrupt(format!("expected network {name:?}, found {found:?}")));
    }
    let count = r.read_u32::<LE>()? as usize;
    if count + 1 != expected.len() {
        return Err(SacError::ShapeMismatch {
            expected: format!("{name} with {} layers", expected.len() - 1),
            got: format!("{count} layers"),
        });
    }
    let mut layers = Vec::with_capacity(count);
    for k in 0..count {
        let rows = r.read_u32::<LE>()? as usize;
        let cols = r.read_u32::<LE>()? as usize;
        if rows != expected[k] || cols != expected[k + 1] {
            return Err(SacError::ShapeMismatch {
                expected: format!("{name} layer {k} of {}x{}", expected[k], expected[k + 1]),
                got: format!("{rows}x{cols}"),
            });
        }
        let w = Array2::from_shape_vec((rows, cols), read_f64s(r, rows * cols)?).expect("sized");
        let b = Array1::from(read_f64s(r, cols)?);
        layers.push(Layer { w, b });
    }
    let net = Mlp::from_layers(layers)?;
    if !net.is_finite() {
        return Err(corrupt(format!("network {name} holds non-finite parameters")));
    }
    Ok(net)
}

fn write_adam<W: Write>(w: &mut W, name: &str, opt: &Adam) -> std::io::Result<()> {
    write_name(w, name)?;
    w.write_u64::<LE>(opt.t)?;
    w.write_u32::<LE>(opt.len() as u32)?;
    write_f64s(w, opt.m.iter())?;
    write_f64s(w, opt.v.iter())
}

fn read_adam<R: Read>(r: &mut R, name: &str, into: &mut Adam) -> Result<(), SacError> {
    let found = read_name(r)?;
    if found != name {
        return Err(corrupt(format!("expected optimiser {name:?}, found {found:?}")));
    }
    into.t = r.read_u64::<LE>()?;
    let len = r.read_u32::<LE>()? as usize;
    if len != into.len() {
        return Err(SacError::ShapeMismatch {
            expected: format!("{name} optimiser of {} values", into.len()),
            got: len.to_string(),
        });
    }
    into.m = read_f64s(r, len)?;
    into.v = read_f64s(r, len)?;
    Ok(())
}

pub fn write<W: Write>(agent: &Agent, progress: Progress, mut w: W) -> Result<(), SacError> {
    let config = toml::to_string(&agent.config).map_err(|e| corrupt(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_u16::<LE>(VERSION)?;
    w.write_u32::<LE>(config.len() as u32)?;
    w.write_all(config.as_bytes())?;
    w.write_u32::<LE>(agent.obs_dim as u32)?;
    w.write_u32::<LE>(agent.act_dim as u32)?;
    w.write_u64::<LE>(progress.episodes)?;
    w.write_u64::<LE>(progress.total_strides)?;
    w.write_u64::<LE>(agent.updates)?;
    w.write_f64::<LE>(agent.log_alpha)?;
    let nets = [&agent.actor, &agent.q1, &agent.q2, &agent.q1_target, &agent.q2_target];
    w.write_u32::<LE>(nets.len() as u32)?;
    for (name, net) in NETWORKS.iter().zip(nets) {
        write_network(&mut w, name, net)?;
    }
    let opts = [&agent.actor_opt, &agent.q1_opt, &agent.q2_opt, &agent.alpha_opt];
    w.write_u32::<LE>(opts.len() as u32)?;
    for (name, opt) in OPTIMISERS.iter().zip(opts) {
        write_adam(&mut w, name, opt)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, rejecting any layer whose shape disagrees with the
/// echoed configuration and dimensions.
pub fn read<R: Read>(mut r: R) -> Result<(Agent, Progress), SacError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic, not a checkpoint"));
    }
    let version = r.read_u16::<LE>()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let n = r.read_u32::<LE>()? as usize;
    let mut text = vec![0; n];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| corrupt("config is not UTF-8"))?;
    let config: SacConfig = toml::from_str(&text).map_err(|e| corrupt(format!("config echo: {e}")))?;
    let obs_dim = r.read_u32::<LE>()? as usize;
    let act_dim = r.read_u32::<LE>()? as usize;
    let progress = Progress {
        episodes: r.read_u64::<LE>()?,
        total_strides: r.read_u64::<LE>()?,
    };
    let updates = r.read_u64::<LE>()?;
    let log_alpha = r.read_f64::<LE>()?;

    let mut agent = Agent::new(config.clone(), obs_dim, act_dim, 0)?;
    let mut actor_sizes = vec![obs_dim];
    actor_sizes.extend(&config.hidden);
    actor_sizes.push(2 * act_dim);
    let mut critic_sizes = vec![obs_dim + act_dim];
    critic_sizes.extend(&config.hidden);
    critic_sizes.push(1);

    let count = r.read_u32::<LE>()? as usize;
    if count != NETWORKS.len() {
        return Err(corrupt(format!("expected {} networks, found {count}", NETWORKS.len())));
    }
    agent.actor = read_network(&mut r, NETWORKS[0], &actor_sizes)?;
    agent.q1 = read_network(&mut r, NETWORKS[1], &critic_sizes)?;
    agent.q2 = read_network(&mut r, NETWORKS[2], &critic_sizes)?;
    agent.q1_target = read_network(&mut r, NETWORKS[3], &critic_sizes)?;
    agent.q2_target = read_network(&mut r, NETWORKS[4], &critic_sizes)?;

    let count = r.read_u32::<LE>()? as usize;
    if count != OPTIMISERS.len() {
        return Err(corrupt(format!(
            "expected {} optimisers, found {count}",
            OPTIMISERS.len()
        )));
    }
    read_adam(&mut r, OPTIMISERS[0], &mut agent.actor_opt)?;
    read_adam(&mut r, OPTIMISERS[1], &mut agent.q1_opt)?;
    read_adam(&mut r, OPTIMISERS[2], &mut agent.q2_opt)?;
    read_adam(&mut r, OPTIMISERS[3], &mut agent.alpha_opt)?;
    agent.log_alpha = log_alpha;
    agent.updates = updates;
    Ok((agent, progress))
}

pub fn save(agent: &Agent, progress: Progress, path: impl AsRef<Path>) -> Result<(), SacError> {
    write(agent, progress, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<(Agent, Progress), SacError> {
    read(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Agent {
        let config = SacConfig {
            hidden: vec![5, 4],
            ..Default::default()
        };
        Agent::new(config, 6, 3, 17).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut agent = small();
        agent.log_alpha = -1.25;
        agent.actor_opt.t = 12;
        agent.actor_opt.m[3] = 0.5;
        let progress = Progress {
            episodes: 7,
            total_strides: 900,
        };
        let mut bytes = Vec::new();
        write(&agent, progress, &mut bytes).unwrap();
        let (back, p) = read(bytes.as_slice()).unwrap();
        assert_eq!(p, progress);
        assert_eq!(back.actor, agent.actor);
        assert_eq!(back.q2_target, agent.q2_target);
        assert_eq!(back.actor_opt, agent.actor_opt);
        assert_eq!(back.log_alpha, -1.25);
        assert_eq!(back.config, agent.config);
        let mut again = Vec::new();
        write(&back, p, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_shape_mismatch_and_garbage() {
        let agent = small();
        let mut bytes = Vec::new();
        write(&agent, Progress::default(), &mut bytes).unwrap();
        // The first layer's row count follows the actor's name and layer count.
        let pos = bytes.windows(5).position(|w| w == b"actor").unwrap() + 5 + 4;
        bytes[pos] = 7;
        assert!(matches!(read(bytes.as_slice()), Err(SacError::ShapeMismatch { .. })));
        assert!(matches!(read(&b"NOPE\x01\x00"[..]), Err(SacError::Checkpoint(_))));
        let mut short = Vec::new();
        write(&agent, Progress::default(), &mut short).unwrap();
        short.truncate(short.len() - 9);
        assert!(read(short.as_slice()).is_err());
    }
}
