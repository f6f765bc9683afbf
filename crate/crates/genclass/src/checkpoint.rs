//! Model checkpoints: the three networks plus metadata, stored as one GCMX
//! file per parameter matrix under a directory with a text manifest.
//!
//! Writes are atomic: everything lands in a sibling temp directory which is
//! renamed over the destination only once complete.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{read_matrix, write_matrix, Precision};
use crate::error::{Error, Result};
use crate::models::{
    Activation, CriticNet, GeneratorNet, IntegratedClassifierNet, LinearLayer, Mlp,
    LEAKY_SLOPE,
};

const MANIFEST: &str = "checkpoint.txt";
const FORMAT: &str = "genclass-checkpoint-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub generator: GeneratorNet,
    pub critic: CriticNet,
    pub classifier: IntegratedClassifierNet,
    pub iteration: u64,
    pub seed: u64,
}

fn activation_from_name(name: &str, path: &Path) -> Result<Activation> {
    match name {
        "leaky_relu" => Ok(Activation::LeakyRelu(LEAKY_SLOPE)),
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "linear" => Ok(Activation::Linear),
        other => Err(Error::Data(format!(
            "{}: unknown activation '{other}'",
            path.display()
        ))),
    }
}

fn dims_to_string(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn param_files(prefix: &str, n_layers: usize) -> Vec<String> {
    (0..n_layers)
        .flat_map(|i| [format!("{prefix}_layer{i}_w.gcmx"), format!("{prefix}_layer{i}_b.gcmx")])
        .collect()
}

/// All parameter file names in manifest order.
fn all_param_files(cp: &Checkpoint) -> Vec<String> {
    let mut files = param_files("generator", cp.generator.mlp.layers.len());
    files.extend(param_files("critic", cp.critic.mlp.layers.len()));
    files.extend(param_files("classifier", cp.classifier.mlp.layers.len()));
    files
}

impl Checkpoint {
    pub fn save(&self, dir: &Path, precision: Precision) -> Result<()> {
        let tmp: PathBuf = dir.with_extension("tmp-write");
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;

        let nets: [(&str, &Mlp); 3] = [
            ("generator", &self.generator.mlp),
            ("critic", &self.critic.mlp),
            ("classifier", &self.classifier.mlp),
        ];
        for (prefix, mlp) in nets {
            for (i, layer) in mlp.layers.iter().enumerate() {
                write_matrix(&tmp.join(format!("{prefix}_layer{i}_w.gcmx")), &layer.w, precision)?;
                write_matrix(&tmp.join(format!("{prefix}_layer{i}_b.gcmx")), &layer.b, precision)?;
            }
        }

        let manifest = format!(
            "format = {FORMAT}\n\
             d_z = {}\n\
             d_a = {}\n\
             d_x = {}\n\
             iteration = {}\n\
             seed = {}\n\
             generator_dims = {}\n\
             generator_hidden = {}\n\
             generator_head = {}\n\
             critic_dims = {}\n\
             critic_hidden = {}\n\
             critic_head = {}\n\
             classifier_dims = {}\n\
             classifier_hidden = {}\n\
             classifier_head = {}\n",
            self.generator.d_z,
            self.generator.d_a,
            self.generator.d_x,
            self.iteration,
            self.seed,
            dims_to_string(&self.generator.mlp.dims()),
            self.generator.mlp.hidden.name(),
            self.generator.mlp.head.name(),
            dims_to_string(&self.critic.mlp.dims()),
            self.critic.mlp.hidden.name(),
            self.critic.mlp.head.name(),
            dims_to_string(&self.classifier.mlp.dims()),
            self.classifier.mlp.hidden.name(),
            self.classifier.mlp.head.name(),
        );
        let mpath = tmp.join(MANIFEST);
        fs::write(&mpath, manifest).map_err(|e| Error::io(mpath.display().to_string(), e))?;

        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        fs::rename(&tmp, dir).map_err(|e| Error::io(dir.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<Checkpoint> {
        let mpath = dir.join(MANIFEST);
        let text =
            fs::read_to_string(&mpath).map_err(|e| Error::io(mpath.display().to_string(), e))?;
        let kv = crate::data::parse_manifest(&text, &mpath)?;
        let need = |key: &str| -> Result<&String> {
            kv.get(key).ok_or_else(|| {
                Error::Data(format!("{}: missing required key '{key}'", mpath.display()))
            })
        };
        if need("format")? != FORMAT {
            return Err(Error::Data(format!(
                "{}: unsupported format '{}'",
                mpath.display(),
                need("format")?
            )));
        }
        let num = |key: &str| -> Result<u64> {
            need(key)?.parse::<u64>().map_err(|_| {
                Error::Data(format!(
                    "{}: key '{key}' must be a non-negative integer",
                    mpath.display()
                ))
            })
        };
        let dims = |key: &str| -> Result<Vec<usize>> {
            need(key)?
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        Error::Data(format!("{}: invalid dimension '{s}' in {key}", mpath.display()))
                    })
                })
                .collect()
        };

        let load_mlp = |prefix: &str| -> Result<Mlp> {
            let dims = dims(&format!("{prefix}_dims"))?;
            if dims.len() < 2 {
                return Err(Error::Data(format!(
                    "{}: {prefix}_dims needs at least input and output",
                    mpath.display()
                )));
            }
            let hidden = activation_from_name(need(&format!("{prefix}_hidden"))?, &mpath)?;
            let head = activation_from_name(need(&format!("{prefix}_head"))?, &mpath)?;
            let mut layers = Vec::new();
            for (i, io) in dims.windows(2).enumerate() {
                let wpath = dir.join(format!("{prefix}_layer{i}_w.gcmx"));
                let bpath = dir.join(format!("{prefix}_layer{i}_b.gcmx"));
                let (w, _) = read_matrix(&wpath)?;
                let (b, _) = read_matrix(&bpath)?;
                if w.shape() != (io[0], io[1]) {
                    return Err(Error::Data(format!(
                        "{}: expected {}x{} weights, found {}x{}",
                        wpath.display(),
                        io[0],
                        io[1],
                        w.rows(),
                        w.cols()
                    )));
                }
                if b.shape() != (1, io[1]) {
                    return Err(Error::Data(format!(
                        "{}: expected 1x{} bias, found {}x{}",
                        bpath.display(),
                        io[1],
                        b.rows(),
                        b.cols()
                    )));
                }
                layers.push(LinearLayer { w, b });
            }
            Ok(Mlp { layers, hidden, head })
        };

        let d_z = num("d_z")? as usize;
        let d_a = num("d_a")? as usize;
        let d_x = num("d_x")? as usize;
        let gen_mlp = load_mlp("generator")?;
        let critic_mlp = load_mlp("critic")?;
        let cls_mlp = load_mlp("classifier")?;
        if gen_mlp.input_dim() != d_z + d_a {
            return Err(Error::Data(format!(
                "{}: generator input {} does not match d_z + d_a = {}",
                mpath.display(),
                gen_mlp.input_dim(),
                d_z + d_a
            )));
        }
        if critic_mlp.input_dim() != d_x + d_a || gen_mlp.output_dim() != d_x {
            return Err(Error::Data(format!(
                "{}: critic/generator dimensions inconsistent with d_x = {d_x}, d_a = {d_a}",
                mpath.display()
            )));
        }
        if cls_mlp.input_dim() != 2 * d_x {
            return Err(Error::Data(format!(
                "{}: classifier input {} does not match 2 * d_x = {}",
                mpath.display(),
                cls_mlp.input_dim(),
                2 * d_x
            )));
        }
        Ok(Checkpoint {
            generator: GeneratorNet { d_z, d_a, d_x, mlp: gen_mlp },
            critic: CriticNet { d_x, d_a, mlp: critic_mlp },
            classifier: IntegratedClassifierNet { d_x, mlp: cls_mlp },
            iteration: num("iteration")?,
            seed: num("seed")?,
        })
    }

    /// SHA-256 over the manifest and every parameter file, in manifest order.
    pub fn fingerprint(dir: &Path) -> Result<String> {
        let cp = Checkpoint::load(dir)?;
        let mut hasher = Sha256::new();
        let mpath = dir.join(MANIFEST);
        let bytes = fs::read(&mpath).map_err(|e| Error::io(mpath.display().to_string(), e))?;
        hasher.update(&bytes);
        for file in all_param_files(&cp) {
            let path = dir.join(file);
            let bytes = fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            hasher.update(&bytes);
        }
        Ok(hex::encode(hasher.finalize()))
    }
}
