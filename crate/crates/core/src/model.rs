//! The disentanglement network: content encoder, style encoder with a residual
//! connection, two training-time projectors and a linear style classifier.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Checkpoint, LinearLayer, Matrix, Mlp, NamedTensor, ParamMut};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Output width of both projectors.
pub const PROJECTION_DIM: usize = 64;

/// Layer widths. The defaults are the full-size architecture: 512-d inputs,
/// 2048-d content and style embeddings, 2048-wide projector hidden layers and
/// 27 style classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub content_hidden: usize,
    pub embed_dim: usize,
    pub projector_hidden: usize,
    pub n_styles: usize,
    /// Replace each encoder by a single linear map `input_dim -> embed_dim`.
    pub single_layer: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_dim: 512,
            content_hidden: 2048,
            embed_dim: 2048,
            projector_hidden: 2048,
            n_styles: 27,
            single_layer: false,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("content_hidden", self.content_hidden),
            ("embed_dim", self.embed_dim),
            ("projector_hidden", self.projector_hidden),
            ("n_styles", self.n_styles),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Content,
    Style,
}

/// Everything produced by a training forward pass.
#[derive(Clone, Debug)]
pub struct TrainOutputs<T> {
    pub content: Matrix<T>,
    pub style: Matrix<T>,
    pub proj_content: Matrix<T>,
    pub proj_style: Matrix<T>,
    pub logits: Matrix<T>,
}

/// Upstream gradients for [`GoyaModel::backward`].
#[derive(Clone, Debug)]
pub struct OutputGrads<T> {
    pub proj_content: Matrix<T>,
    pub proj_style: Matrix<T>,
    pub logits: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct GoyaModel<T> {
    arch: ArchConfig,
    content: Mlp<T>,
    style: Mlp<T>,
    proj_content: Mlp<T>,
    proj_style: Mlp<T>,
    classifier: Mlp<T>,
}

const PART_NAMES: [&str; 5] = ["content", "style", "proj_c", "proj_s", "classifier"];

impl<T: Scalar> GoyaModel<T> {
    /// He-initialised model; layers are drawn in canonical order from one seeded stream.
    pub fn new(arch: ArchConfig, rng_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        Self::build(arch, |i, o| LinearLayer::he(i, o, &mut rng))
    }

    pub fn zeros(arch: ArchConfig) -> Result<Self> {
        Self::build(arch, LinearLayer::zeros)
    }

    fn build(arch: ArchConfig, mut make: impl FnMut(usize, usize) -> LinearLayer<T>) -> Result<Self> {
        arch.validate()?;
        let d = arch.input_dim;
        let (content, style) = if arch.single_layer {
            (
                Mlp::new(vec![make(d, arch.embed_dim)], None)?,
                Mlp::new(vec![make(d, arch.embed_dim)], None)?,
            )
        } else {
            (
                Mlp::new(
                    vec![make(d, arch.content_hidden), make(arch.content_hidden, arch.embed_dim)],
                    None,
                )?,
                Mlp::new(vec![make(d, d), make(d, d), make(d, arch.embed_dim)], Some(1))?,
            )
        };
        let mut projector = || {
            Mlp::new(
                vec![
                    make(arch.embed_dim, arch.projector_hidden),
                    make(arch.projector_hidden, PROJECTION_DIM),
                ],
                None,
            )
        };
        let proj_content = projector()?;
        let proj_style = projector()?;
        let classifier = Mlp::new(vec![make(arch.embed_dim, arch.n_styles)], None)?;
        Ok(Self {
            arch,
            content,
            style,
            proj_content,
            proj_style,
            classifier,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    fn check_input(&self, g: &Matrix<T>) -> Result<()> {
        if g.cols() != self.arch.input_dim {
            return Err(Error::shape(
                "encoder input",
                format!("{} columns", self.arch.input_dim),
                format!("{} columns", g.cols()),
            ));
        }
        Ok(())
    }

    pub fn content_forward(&self, g: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(g)?;
        self.content.forward(g)
    }

    pub fn style_forward(&self, g: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(g)?;
        self.style.forward(g)
    }

    pub fn project(&self, which: Branch, e: &Matrix<T>) -> Result<Matrix<T>> {
        match which {
            Branch::Content => self.proj_content.forward(e),
            Branch::Style => self.proj_style.forward(e),
        }
    }

    /// Style logits from the style embedding (not its projection).
    pub fn classify_style(&self, style_emb: &Matrix<T>) -> Result<Matrix<T>> {
        self.classifier.forward(style_emb)
    }

    pub fn forward_train(&mut self, g: &Matrix<T>) -> Result<TrainOutputs<T>> {
        self.check_input(g)?;
        let content = self.content.forward_train(g)?;
        let style = self.style.forward_train(g)?;
        let proj_content = self.proj_content.forward_train(&content)?;
        let proj_style = self.proj_style.forward_train(&style)?;
        let logits = self.classifier.forward_train(&style)?;
        Ok(TrainOutputs {
            content,
            style,
            proj_content,
            proj_style,
            logits,
        })
    }

    /// Accumulates parameter gradients; returns the gradient with respect to
    /// the model input (sum over both encoders).
    pub fn backward(&mut self, grads: &OutputGrads<T>) -> Result<Matrix<T>> {
        let d_content = self.proj_content.backward(&grads.proj_content)?;
        let mut d_style = self.proj_style.backward(&grads.proj_style)?;
        d_style.add_assign(&self.classifier.backward(&grads.logits)?)?;
        let mut d_input = self.content.backward(&d_content)?;
        d_input.add_assign(&self.style.backward(&d_style)?)?;
        Ok(d_input)
    }

    pub fn clear_caches(&mut self) {
        for part in self.parts_mut() {
            part.clear_cache();
        }
    }

    pub fn zero_grad(&mut self) {
        for part in self.parts_mut() {
            part.zero_grad();
        }
    }

    fn parts(&self) -> [&Mlp<T>; 5] {
        [
            &self.content,
            &self.style,
            &self.proj_content,
            &self.proj_style,
            &self.classifier,
        ]
    }

    fn parts_mut(&mut self) -> [&mut Mlp<T>; 5] {
        [
            &mut self.content,
            &mut self.style,
            &mut self.proj_content,
            &mut self.proj_style,
            &mut self.classifier,
        ]
    }

    fn layer_prefix(part: usize, layer: usize) -> String {
        if PART_NAMES[part] == "classifier" {
            "classifier".to_string()
        } else {
            format!("{}.l{}", PART_NAMES[part], layer + 1)
        }
    }

    /// Layers under their canonical names (`content.l1`, `style.l3`, `classifier`, ...).
    pub fn named_layers(&self) -> Vec<(String, &LinearLayer<T>)> {
        let mut out = Vec::new();
        for (p, part) in self.parts().into_iter().enumerate() {
            for (l, layer) in part.layers().iter().enumerate() {
                out.push((Self::layer_prefix(p, l), layer));
            }
        }
        out
    }

    pub fn named_layers_mut(&mut self) -> Vec<(String, &mut LinearLayer<T>)> {
        let mut out = Vec::new();
        for (p, part) in self.parts_mut().into_iter().enumerate() {
            for (l, layer) in part.layers_mut().iter_mut().enumerate() {
                out.push((Self::layer_prefix(p, l), layer));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = Vec::new();
        for (name, layer) in self.named_layers_mut() {
            let LinearLayer {
                weight,
                bias,
                grad_weight,
                grad_bias,
            } = layer;
            out.push(ParamMut {
                name: format!("{name}.weight"),
                value: weight.data_mut(),
                grad: grad_weight.data(),
            });
            out.push(ParamMut {
                name: format!("{name}.bias"),
                value: bias.as_mut_slice(),
                grad: grad_bias.as_slice(),
            });
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_layers()
            .iter()
            .map(|(_, l)| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Snapshot as f32 checkpoint tensors; `metadata` is extended with the architecture.
    pub fn to_checkpoint(&self, metadata: serde_json::Value) -> Result<Checkpoint> {
        let mut meta = match metadata {
            serde_json::Value::Object(m) => m,
            serde_json::Value::Null => serde_json::Map::new(),
            other => {
                let mut m = serde_json::Map::new();
                m.insert("extra".into(), other);
                m
            }
        };
        meta.insert("arch".into(), serde_json::to_value(&self.arch)?);
        let mut tensors = Vec::new();
        for (name, layer) in self.named_layers() {
            let (o, i) = layer.weight.shape();
            tensors.push(NamedTensor::new(
                format!("{name}.weight"),
                vec![o as u64, i as u64],
                layer.weight.data().iter().map(|v| v.to_f32_lossy()).collect(),
            )?);
            tensors.push(NamedTensor::new(
                format!("{name}.bias"),
                vec![o as u64],
                layer.bias.iter().map(|v| v.to_f32_lossy()).collect(),
            )?);
        }
        Ok(Checkpoint {
            tensors,
            metadata: serde_json::Value::Object(meta),
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let arch: ArchConfig = serde_json::from_value(
            ck.metadata
                .get("arch")
                .cloned()
                .ok_or_else(|| Error::Config("checkpoint metadata lacks an architecture".into()))?,
        )
        .map_err(|e| Error::Config(format!("checkpoint architecture: {e}")))?;
        let mut model = Self::zeros(arch)?;
        let mut expected = 0;
        for (name, layer) in model.named_layers_mut() {
            let (o, i) = layer.weight.shape();
            let w = fetch(ck, &format!("{name}.weight"), &[o as u64, i as u64])?;
            let b = fetch(ck, &format!("{name}.bias"), &[o as u64])?;
            for (dst, &src) in layer.weight.data_mut().iter_mut().zip(&w.data) {
                *dst = T::from_stored(src);
            }
            for (dst, &src) in layer.bias.iter_mut().zip(&b.data) {
                *dst = T::from_stored(src);
            }
            expected += 2;
        }
        if ck.tensors.len() != expected {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, architecture needs {expected}",
                ck.tensors.len()
            )));
        }
        Ok(model)
    }
}

fn fetch<'a>(ck: &'a Checkpoint, name: &str, dims: &[u64]) -> Result<&'a NamedTensor> {
    let t = ck
        .get(name)
        .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {name}")))?;
    if t.dims != dims {
        return Err(Error::shape("checkpoint tensor", format!("{name} {dims:?}"), format!("{:?}", t.dims)));
    }
    if t.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("checkpoint tensor {name}")));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ArchConfig {
        ArchConfig {
            input_dim: 6,
            content_hidden: 8,
            embed_dim: 10,
            projector_hidden: 7,
            n_styles: 3,
            single_layer: false,
        }
    }

    fn input(n: usize, d: usize) -> Matrix<f64> {
        Matrix::from_fn(n, d, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0)
    }

    #[test]
    fn default_shapes_follow_reference_architecture() {
        let m = GoyaModel::<f32>::zeros(ArchConfig::default()).unwrap();
        let shapes: Vec<(String, (usize, usize))> = m
            .named_layers()
            .into_iter()
            .map(|(n, l)| (n, (l.inputs(), l.outputs())))
            .collect();
        let expect = [
            ("content.l1", (512, 2048)),
            ("content.l2", (2048, 2048)),
            ("style.l1", (512, 512)),
            ("style.l2", (512, 512)),
            ("style.l3", (512, 2048)),
            ("proj_c.l1", (2048, 2048)),
            ("proj_c.l2", (2048, 64)),
            ("proj_s.l1", (2048, 2048)),
            ("proj_s.l2", (2048, 64)),
            ("classifier", (2048, 27)),
        ];
        assert_eq!(shapes.len(), expect.len());
        for ((n, s), (en, es)) in shapes.iter().zip(expect) {
            assert_eq!((n.as_str(), *s), (en, es));
        }
    }

    #[test]
    fn zero_model_outputs_zero_and_handles_empty_batch() {
        let m = GoyaModel::<f64>::zeros(small()).unwrap();
        let g = input(4, 6);
        assert!(m.content_forward(&g).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(m.style_forward(&g).unwrap().data().iter().all(|&v| v == 0.0));
        let e = Matrix::zeros(4, 10);
        assert_eq!(m.project(Branch::Content, &e).unwrap().shape(), (4, PROJECTION_DIM));
        assert!(m.classify_style(&e).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(m.content_forward(&Matrix::zeros(0, 6)).unwrap().shape(), (0, 10));
    }

    #[test]
    fn skip_passes_input_through_when_middle_layer_is_zero() {
        let mut m = GoyaModel::<f64>::new(small(), 3).unwrap();
        {
            let layers = m.style.layers_mut();
            layers[1].weight.fill(0.0);
            layers[1].bias.iter_mut().for_each(|b| *b = 0.0);
            // make the last layer the identity on the first 6 outputs
            layers[2].weight = Matrix::from_fn(10, 6, |i, j| if i == j { 1.0 } else { 0.0 });
            layers[2].bias = vec![0.0; 10];
        }
        let g = input(3, 6);
        let out = m.style_forward(&g).unwrap();
        for r in 0..3 {
            for c in 0..6 {
                assert_eq!(out.get(r, c), g.get(r, c).max(0.0));
            }
        }
    }

    #[test]
    fn encoders_are_independent() {
        let mut m = GoyaModel::<f64>::new(small(), 5).unwrap();
        let g = input(5, 6);
        let (c0, s0) = (m.content_forward(&g).unwrap(), m.style_forward(&g).unwrap());
        for (name, layer) in m.named_layers_mut() {
            if name.starts_with("content") {
                layer.weight.data_mut()[0] += 1.0;
            }
        }
        assert_eq!(m.style_forward(&g).unwrap(), s0);
        assert_ne!(m.content_forward(&g).unwrap(), c0);
        let c1 = m.content_forward(&g).unwrap();
        for (name, layer) in m.named_layers_mut() {
            if name.starts_with("style") {
                layer.bias[0] += 1.0;
            }
        }
        assert_eq!(m.content_forward(&g).unwrap(), c1);
    }

    #[test]
    fn single_layer_encoders() {
        for width in [256, 512, 1024, 2048] {
            let arch = ArchConfig {
                input_dim: 16,
                embed_dim: width,
                projector_hidden: 8,
                single_layer: true,
                ..ArchConfig::default()
            };
            let m = GoyaModel::<f32>::zeros(arch).unwrap();
            assert_eq!(m.content.layers().len(), 1);
            assert_eq!(m.style_forward(&Matrix::zeros(2, 16)).unwrap().cols(), width);
        }
    }

    #[test]
    fn wrong_input_width_is_shape_error() {
        let m = GoyaModel::<f64>::zeros(small()).unwrap();
        assert!(matches!(m.content_forward(&Matrix::zeros(2, 5)), Err(Error::Shape { .. })));
    }

    #[test]
    fn checkpoint_round_trip_restores_f32_parameters() {
        let m = GoyaModel::<f32>::new(small(), 11).unwrap();
        let ck = m.to_checkpoint(serde_json::json!({"epoch": 1})).unwrap();
        let back = GoyaModel::<f32>::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap()).unwrap();
        for ((na, a), (nb, b)) in m.named_layers().iter().zip(back.named_layers()) {
            assert_eq!(na, &nb);
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.bias, b.bias);
        }
    }
}
