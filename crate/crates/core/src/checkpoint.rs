//! Checkpoint files: a short text header followed by one little-endian f64
//! blob.
//!
//! ```text
//! PARKSAC-CKPT v1
//! config <echoed config line>        (any number)
//! meta <key> <values...>
//! tensor <name> <dims, comma separated> <byte offset>
//! blob <byte length> <fnv1a64 of blob, hex>
//! <blob bytes>
//! ```
//!
//! Random streams are derived from the seed and the counters, so the
//! networks, optimizer moments, temperature, counters and replay buffer are
//! all a resumed run needs.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::nn::{Adam, GaussianPolicy, Mlp, TwinCritic, ACTION_DIM};
use crate::output::write_atomic;
use crate::sac::{ReplayBuffer, TrainState};

pub const MAGIC: &str = "PARKSAC-CKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic line)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(String),
    #[error("checkpoint truncated: expected {expected} blob bytes, found {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("checkpoint checksum mismatch: header says {expected:016x}, blob hashes to {got:016x}")]
    Checksum { expected: u64, got: u64 },
    #[error("malformed checkpoint header line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("checkpoint tensor '{name}': {msg}")]
    Tensor { name: String, msg: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Tensor {
    name: String,
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn tensor(name: &str, dims: &[usize], data: &[f64]) -> Tensor {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    Tensor {
        name: name.into(),
        dims: dims.to_vec(),
        data: data.to_vec(),
    }
}

fn adam_tensors(out: &mut Vec<Tensor>, name: &str, a: &Adam) {
    out.push(tensor(&format!("{name}.m"), &[a.m.len()], &a.m));
    out.push(tensor(&format!("{name}.v"), &[a.v.len()], &a.v));
}

/// Write `state` to `path` atomically (temp file, then rename).
pub fn save_checkpoint(path: &Path, state: &TrainState, config_echo: &[String]) -> Result<(), CheckpointError> {
    let obs_dim = state.policy.obs_dim();
    let hidden: Vec<usize> = {
        let s = state.policy.net.sizes();
        s[1..s.len() - 1].to_vec()
    };
    let buf = &state.buffer;
    let n = buf.len();
    let (obs, actions, rewards, next_obs, dones) = buf.columns();

    let mut ts = vec![
        tensor("policy", &[state.policy.net.num_params()], state.policy.net.params()),
        tensor("q1", &[state.critics.q1.num_params()], state.critics.q1.params()),
        tensor("q2", &[state.critics.q2.num_params()], state.critics.q2.params()),
        tensor("q1_target", &[state.targets.q1.num_params()], state.targets.q1.params()),
        tensor("q2_target", &[state.targets.q2.num_params()], state.targets.q2.params()),
    ];
    adam_tensors(&mut ts, "adam_policy", &state.policy_opt);
    adam_tensors(&mut ts, "adam_q1", &state.q1_opt);
    adam_tensors(&mut ts, "adam_q2", &state.q2_opt);
    adam_tensors(&mut ts, "adam_alpha", &state.alpha_opt);
    ts.push(tensor("log_alpha", &[1], &[state.log_alpha]));
    ts.push(tensor("buffer.obs", &[n, obs_dim], obs));
    ts.push(tensor("buffer.actions", &[n, ACTION_DIM], actions));
    ts.push(tensor("buffer.rewards", &[n], rewards));
    ts.push(tensor("buffer.next_obs", &[n, obs_dim], next_obs));
    ts.push(tensor("buffer.dones", &[n], dones));

    let mut blob = Vec::with_capacity(ts.iter().map(|t| t.data.len() * 8).sum());
    let mut header = format!("{MAGIC} v{VERSION}\n");
    for line in config_echo {
        header.push_str(&format!("config {}\n", line.replace('\n', " ")));
    }
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    header.push_str(&format!("meta obs_dim {obs_dim}\n"));
    header.push_str(&format!("meta hidden {}\n", list(&hidden)));
    header.push_str(&format!(
        "meta bounds {:016x} {:016x}\n",
        state.policy.bounds[0].to_bits(),
        state.policy.bounds[1].to_bits()
    ));
    header.push_str(&format!(
        "meta counters {} {} {}\n",
        state.env_steps, state.updates, state.episodes
    ));
    header.push_str(&format!("meta buffer {} {}\n", buf.capacity(), buf.pushes()));
    header.push_str(&format!(
        "meta adam_steps {} {} {} {}\n",
        state.policy_opt.t, state.q1_opt.t, state.q2_opt.t, state.alpha_opt.t
    ));
    for t in &ts {
        header.push_str(&format!("tensor {} {} {}\n", t.name, list(&t.dims), blob.len()));
        for v in &t.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    header.push_str(&format!("blob {} {:016x}\n", blob.len(), fnv1a64(&blob)));

    let mut bytes = header.into_bytes();
    bytes.extend_from_slice(&blob);
    write_atomic(path, &bytes)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub state: TrainState,
    pub config_echo: Vec<String>,
}

struct Header {
    config: Vec<String>,
    meta: Vec<(String, Vec<String>, usize)>,
    tensors: Vec<(String, Vec<usize>, usize, usize)>,
    blob_len: u64,
    checksum: u64,
}

fn header_err(line: usize, msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Header { line, msg: msg.into() }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header, CheckpointError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let first = line.trim_end();
    let Some(ver) = first.strip_prefix(MAGIC) else {
        return Err(CheckpointError::BadMagic);
    };
    if ver.trim() != format!("v{VERSION}") {
        return Err(CheckpointError::Version(ver.trim().to_string()));
    }
    let mut h = Header {
        config: Vec::new(),
        meta: Vec::new(),
        tensors: Vec::new(),
        blob_len: 0,
        checksum: 0,
    };
    let mut no = 1;
    loop {
        line.clear();
        no += 1;
        if r.read_line(&mut line)? == 0 {
            return Err(CheckpointError::Truncated { expected: 1, got: 0 });
        }
        let l = line.trim_end_matches('\n');
        let (kind, rest) = l.split_once(' ').unwrap_or((l, ""));
        match kind {
            "config" => h.config.push(rest.to_string()),
            "meta" => {
                let mut it = rest.split_whitespace().map(str::to_string);
                let key = it.next().ok_or_else(|| header_err(no, "empty meta line"))?;
                h.meta.push((key, it.collect(), no));
            }
            "tensor" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(header_err(no, "tensor line needs name, dims and offset"));
                }
                let dims = f[1]
                    .split(',')
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| header_err(no, format!("bad dims '{}': {e}", f[1])))?;
                let off = f[2].parse().map_err(|e| header_err(no, format!("bad offset: {e}")))?;
                h.tensors.push((f[0].to_string(), dims, off, no));
            }
            "blob" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 2 {
                    return Err(header_err(no, "blob line needs length and checksum"));
                }
                h.blob_len = f[0].parse().map_err(|e| header_err(no, format!("bad blob length: {e}")))?;
                h.checksum =
                    u64::from_str_radix(f[1], 16).map_err(|e| header_err(no, format!("bad checksum: {e}")))?;
                return Ok(h);
            }
            other => return Err(header_err(no, format!("unknown record '{other}'"))),
        }
    }
}

struct Blob<'a> {
    header: &'a Header,
    bytes: &'a [u8],
}

impl Blob<'_> {
    fn get(&self, name: &str, dims: &[usize]) -> Result<Vec<f64>, CheckpointError> {
        let terr = |msg: String| CheckpointError::Tensor {
            name: name.to_string(),
            msg,
        };
        let (_, d, off, _) = self
            .header
            .tensors
            .iter()
            .find(|t| t.0 == name)
            .ok_or_else(|| terr("missing".into()))?;
        if d != dims {
            return Err(terr(format!("shape {d:?}, expected {dims:?}")));
        }
        let len = dims.iter().product::<usize>() * 8;
        if off % 8 != 0 || off + len > self.bytes.len() {
            return Err(terr(format!("offset {off} with {len} bytes lies outside the blob")));
        }
        Ok(self.bytes[*off..off + len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

fn meta<'a>(h: &'a Header, key: &str, n: usize) -> Result<&'a [String], CheckpointError> {
    let (_, vals, line) = h
        .meta
        .iter()
        .find(|m| m.0 == key)
        .ok_or_else(|| header_err(0, format!("missing meta '{key}'")))?;
    if vals.len() != n {
        return Err(header_err(*line, format!("meta '{key}' needs {n} values")));
    }
    Ok(vals)
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CheckpointError>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| header_err(0, format!("bad {what} '{s}': {e}")))
}

fn load_adam(blob: &Blob, name: &str, n: usize, t: u64) -> Result<Adam, CheckpointError> {
    let mut a = Adam::new(n);
    a.m = blob.get(&format!("{name}.m"), &[n])?;
    a.v = blob.get(&format!("{name}.v"), &[n])?;
    a.t = t;
    Ok(a)
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if (bytes.len() as u64) < h.blob_len {
        return Err(CheckpointError::Truncated {
            expected: h.blob_len,
            got: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > h.blob_len {
        return Err(header_err(0, format!("{} trailing bytes after the blob", bytes.len() as u64 - h.blob_len)));
    }
    // manifest entries must tile the blob exactly, in order
    let mut expected_off = 0usize;
    for (name, dims, off, line) in &h.tensors {
        if *off != expected_off {
            return Err(header_err(*line, format!("tensor '{name}' at offset {off}, expected {expected_off}")));
        }
        expected_off += dims.iter().product::<usize>() * 8;
    }
    if expected_off as u64 != h.blob_len {
        return Err(header_err(0, format!("manifest covers {expected_off} bytes but blob has {}", h.blob_len)));
    }
    let got = fnv1a64(&bytes);
    if got != h.checksum {
        return Err(CheckpointError::Checksum {
            expected: h.checksum,
            got,
        });
    }
    let blob = Blob {
        header: &h,
        bytes: &bytes,
    };

    let obs_dim: usize = parse(&meta(&h, "obs_dim", 1)?[0], "obs_dim")?;
    let hidden_s = &meta(&h, "hidden", 1)?[0];
    let hidden = hidden_s
        .split(',')
        .map(|s| parse::<usize>(s, "hidden size"))
        .collect::<Result<Vec<_>, _>>()?;
    let b = meta(&h, "bounds", 2)?;
    let bits = |s: &str| u64::from_str_radix(s, 16).map_err(|e| header_err(0, format!("bad bound '{s}': {e}")));
    let bounds = [f64::from_bits(bits(&b[0])?), f64::from_bits(bits(&b[1])?)];
    let c = meta(&h, "counters", 3)?;
    let (env_steps, updates, episodes) = (parse(&c[0], "env_steps")?, parse(&c[1], "updates")?, parse(&c[2], "episodes")?);
    let bm = meta(&h, "buffer", 2)?;
    let (capacity, pushes): (usize, u64) = (parse(&bm[0], "capacity")?, parse(&bm[1], "pushes")?);
    let at = meta(&h, "adam_steps", 4)?;

    let mlp = |name: &str, sizes: &[usize]| -> Result<Mlp, CheckpointError> {
        let n = Mlp::zeros(sizes).num_params();
        let p = blob.get(name, &[n])?;
        Mlp::from_params(sizes, p).map_err(|e| CheckpointError::Tensor {
            name: name.into(),
            msg: e.to_string(),
        })
    };
    let psizes = GaussianPolicy::layer_sizes(obs_dim, &hidden);
    let qsizes = TwinCritic::layer_sizes(obs_dim, &hidden);
    let policy = GaussianPolicy {
        net: mlp("policy", &psizes)?,
        bounds,
    };
    let critics = TwinCritic {
        q1: mlp("q1", &qsizes)?,
        q2: mlp("q2", &qsizes)?,
    };
    let targets = TwinCritic {
        q1: mlp("q1_target", &qsizes)?,
        q2: mlp("q2_target", &qsizes)?,
    };
    let (np, nq) = (policy.net.num_params(), critics.q1.num_params());

    let n = h
        .tensors
        .iter()
        .find(|t| t.0 == "buffer.rewards")
        .and_then(|t| t.1.first().copied())
        .ok_or_else(|| CheckpointError::Tensor {
            name: "buffer.rewards".into(),
            msg: "missing".into(),
        })?;
    let buffer = ReplayBuffer::from_columns(
        capacity,
        obs_dim,
        bounds,
        pushes,
        blob.get("buffer.obs", &[n, obs_dim])?,
        blob.get("buffer.actions", &[n, ACTION_DIM])?,
        blob.get("buffer.rewards", &[n])?,
        blob.get("buffer.next_obs", &[n, obs_dim])?,
        blob.get("buffer.dones", &[n])?,
    )
    .map_err(|msg| CheckpointError::Tensor {
        name: "buffer".into(),
        msg,
    })?;

    let state = TrainState {
        policy_opt: load_adam(&blob, "adam_policy", np, parse(&at[0], "adam step")?)?,
        q1_opt: load_adam(&blob, "adam_q1", nq, parse(&at[1], "adam step")?)?,
        q2_opt: load_adam(&blob, "adam_q2", nq, parse(&at[2], "adam step")?)?,
        alpha_opt: load_adam(&blob, "adam_alpha", 1, parse(&at[3], "adam step")?)?,
        log_alpha: blob.get("log_alpha", &[1])?[0],
        policy,
        critics,
        targets,
        buffer,
        env_steps,
        updates,
        episodes,
    };
    Ok(LoadedCheckpoint {
        state,
        config_echo: h.config.clone(),
    })
}
