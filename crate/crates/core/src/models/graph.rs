use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kind::ArchitectureKind;
use crate::data::{LabeledBatch, MixedBatch};
use crate::error::{MdalError, Result};
use crate::nn::{
    cross_entropy_scaled, softmax_rows, Activation, DenseCache, DenseLayer, GradientReversal, LayerGrads,
    Tensor2,
};

/// Dimensions and trade-off needed to build a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ArchitectureKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
    pub domains: usize,
    pub lambda: f64,
}

/// What a layer belongs to, for routing checks and grouped finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamRole {
    Shared,
    Private(usize),
    Classifier(usize),
    Discriminator,
}

/// Which segment of a share-private classifier input is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionPart {
    Whole,
    Shared,
    Private,
}

/// A wired composition of extractors, classifier heads and an optional discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    spec: ModelSpec,
    layers: Vec<DenseLayer>,
    roles: Vec<ParamRole>,
    shared: Vec<usize>,
    private: Vec<Vec<usize>>,
    heads: Vec<usize>,
    discriminator: Option<usize>,
}

/// Per-instance view of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub shared: Option<Vec<f64>>,
    pub private: Option<Vec<f64>>,
    /// The classifier input.
    pub penultimate: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Row-batched [`ForwardTrace`] for instances of a single domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub shared: Option<Tensor2>,
    pub private: Option<Tensor2>,
    pub penultimate: Tensor2,
    pub probs: Tensor2,
}

/// Gradients for every layer, parallel to the model's layer list.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros(model: &ModelGraph) -> Self {
        Self {
            layers: model.layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|g| g.iter().copied()).collect()
    }
}

struct ClassifierPass {
    shared: Option<(Tensor2, Vec<DenseCache>)>,
    private: Option<(Tensor2, Vec<DenseCache>)>,
    head_in: Tensor2,
    head_cache: DenseCache,
    logits: Tensor2,
}

pub fn build_model<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<ModelGraph> {
    if spec.domains < 2 {
        return Err(MdalError::Config(format!(
            "multi-domain models need at least 2 domains, got {}",
            spec.domains
        )));
    }
    if spec.input_dim == 0 || spec.hidden_dim == 0 || spec.classes == 0 {
        return Err(MdalError::Config("model dimensions must be at least 1".into()));
    }
    GradientReversal::new(spec.lambda).map_err(|e| MdalError::Config(e.to_string()))?;

    let (d, h, c, k) = (spec.input_dim, spec.hidden_dim, spec.classes, spec.domains);
    let kind = spec.kind;
    let mut layers = Vec::new();
    let mut roles = Vec::new();
    let mut push = |layer: DenseLayer, role: ParamRole| {
        layers.push(layer);
        roles.push(role);
        layers.len() - 1
    };

    let shared = if kind.has_shared_extractor() {
        vec![push(DenseLayer::glorot("shared", d, h, Activation::Relu, rng), ParamRole::Shared)]
    } else {
        Vec::new()
    };
    let private = if kind.has_private_extractors() {
        (0..k)
            .map(|j| {
                vec![push(
                    DenseLayer::glorot(format!("private{j}"), d, h, Activation::Relu, rng),
                    ParamRole::Private(j),
                )]
            })
            .collect()
    } else {
        Vec::new()
    };
    let head_in = if kind.is_share_private() { 2 * h } else { h };
    let heads = if kind.per_domain_classifiers() {
        (0..k)
            .map(|j| {
                push(
                    DenseLayer::glorot(format!("classifier{j}"), head_in, c, Activation::Identity, rng),
                    ParamRole::Classifier(j),
                )
            })
            .collect()
    } else {
        vec![push(
            DenseLayer::glorot("classifier", head_in, c, Activation::Identity, rng),
            ParamRole::Classifier(0),
        )]
    };
    let discriminator = kind.has_discriminator().then(|| {
        let input = if kind == ArchitectureKind::Can { h + c } else { h };
        push(
            DenseLayer::glorot("discriminator", input, k, Activation::Identity, rng),
            ParamRole::Discriminator,
        )
    });

    Ok(ModelGraph {
        spec: *spec,
        layers,
        roles,
        shared,
        private,
        heads,
        discriminator,
    })
}

/// Rows of a batch grouped by domain id, in ascending domain order.
fn group_by_domain(domains: &[usize], k: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (r, &d) in domains.iter().enumerate() {
        if d >= k {
            return Err(MdalError::Input(format!(
                "domain id {d} out of range for {k} domains"
            )));
        }
        groups[d].push(r);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .collect())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Last-layer gradient embedding at the predicted label:
/// `vec((p − e_ŷ) ⊗ h)` in weight layout (`h` index major) followed by the bias block `p − e_ŷ`.
pub fn badge_embedding(probs: &[f64], penultimate: &[f64]) -> Vec<f64> {
    let yhat = argmax(probs);
    let mut resid = probs.to_vec();
    resid[yhat] -= 1.0;
    let mut out = Vec::with_capacity(penultimate.len() * probs.len() + probs.len());
    for &hi in penultimate {
        out.extend(resid.iter().map(|r| hi * r));
    }
    out.extend_from_slice(&resid);
    out
}

impl ModelGraph {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.spec.kind
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn domain_count(&self) -> usize {
        self.spec.domains
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut Vec<DenseLayer> {
        &mut self.layers
    }

    pub fn roles(&self) -> &[ParamRole] {
        &self.roles
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Width of the classifier input.
    pub fn penultimate_dim(&self) -> usize {
        self.layers[self.heads[0]].input_dim()
    }

    /// Flat index range of each layer's parameters, with its role.
    pub fn param_ranges(&self) -> Vec<(ParamRole, Range<usize>)> {
        let mut start = 0;
        self.layers
            .iter()
            .zip(&self.roles)
            .map(|(l, &role)| {
                let end = start + l.param_count();
                let r = (role, start..end);
                start = end;
                r
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(MdalError::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.data_mut() {
                *w = it.next().expect("length checked");
            }
            for b in &mut l.bias {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_domain(&self, domain: usize) -> Result<()> {
        if domain >= self.spec.domains {
            return Err(MdalError::Input(format!(
                "domain id {domain} out of range for {} domains",
                self.spec.domains
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &Tensor2) -> Result<()> {
        if x.cols() != self.spec.input_dim {
            return Err(MdalError::Dimension(format!(
                "model expects {} features, got {}",
                self.spec.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    fn head_for(&self, domain: usize) -> usize {
        if self.heads.len() == 1 {
            self.heads[0]
        } else {
            self.heads[domain]
        }
    }

    fn run_stack(&self, stack: &[usize], x: &Tensor2) -> Result<(Tensor2, Vec<DenseCache>)> {
        let mut caches = Vec::with_capacity(stack.len());
        let mut cur = x.clone();
        for &li in stack {
            let (y, c) = self.layers[li].forward(&cur)?;
            caches.push(c);
            cur = y;
        }
        Ok((cur, caches))
    }

    fn stack_backward(
        &self,
        stack: &[usize],
        caches: &[DenseCache],
        upstream: Tensor2,
        grads: &mut Gradients,
    ) -> Result<()> {
        let mut g = upstream;
        for (&li, cache) in stack.iter().zip(caches).rev() {
            let (dx, lg) = self.layers[li].backward(cache, &g)?;
            grads.layers[li].add_assign(&lg);
            g = dx;
        }
        Ok(())
    }

    fn classifier_pass(&self, x: &Tensor2, domain: usize, part: PredictionPart) -> Result<ClassifierPass> {
        self.check_x(x)?;
        self.check_domain(domain)?;
        let shared = if self.shared.is_empty() {
            None
        } else {
            Some(self.run_stack(&self.shared, x)?)
        };
        let private = if self.private.is_empty() {
            None
        } else {
            Some(self.run_stack(&self.private[domain], x)?)
        };
        let head_in = if self.kind().is_share_private() {
            let mut s = shared.as_ref().expect("share-private has shared F").0.clone();
            let mut p = private.as_ref().expect("share-private has private F").0.clone();
            match part {
                PredictionPart::Whole => {}
                PredictionPart::Shared => p.data_mut().iter_mut().for_each(|v| *v = 0.0),
                PredictionPart::Private => s.data_mut().iter_mut().for_each(|v| *v = 0.0),
            }
            s.hcat(&p)?
        } else if let Some((s, _)) = &shared {
            s.clone()
        } else {
            private.as_ref().expect("every kind has an extractor").0.clone()
        };
        let (logits, head_cache) = self.layers[self.head_for(domain)].forward(&head_in)?;
        Ok(ClassifierPass {
            shared,
            private,
            head_in,
            head_cache,
            logits,
        })
    }

    fn classifier_backward(
        &self,
        pass: ClassifierPass,
        domain: usize,
        dlogits: &Tensor2,
        grads: &mut Gradients,
    ) -> Result<()> {
        let head = self.head_for(domain);
        let (d_in, g) = self.layers[head].backward(&pass.head_cache, dlogits)?;
        grads.layers[head].add_assign(&g);
        if self.kind().is_share_private() {
            let (ds, dp) = d_in.split_cols(self.spec.hidden_dim);
            let (_, sc) = pass.shared.expect("share-private has shared F");
            self.stack_backward(&self.shared, &sc, ds, grads)?;
            let (_, pc) = pass.private.expect("share-private has private F");
            self.stack_backward(&self.private[domain], &pc, dp, grads)?;
        } else if let Some((_, sc)) = pass.shared {
            self.stack_backward(&self.shared, &sc, d_in, grads)?;
        } else if let Some((_, pc)) = pass.private {
            self.stack_backward(&self.private[domain], &pc, d_in, grads)?;
        }
        Ok(())
    }

    /// Routes a batch of one domain through the architecture.
    pub fn trace(&self, x: &Tensor2, domain: usize, part: PredictionPart) -> Result<BatchTrace> {
        if part != PredictionPart::Whole && !self.kind().is_share_private() {
            return Err(MdalError::Config(format!(
                "part predictions need a share-private model, {} is not",
                self.kind()
            )));
        }
        let pass = self.classifier_pass(x, domain, part)?;
        Ok(BatchTrace {
            shared: pass.shared.map(|(t, _)| t),
            private: pass.private.map(|(t, _)| t),
            probs: softmax_rows(&pass.logits),
            penultimate: pass.head_in,
        })
    }

    pub fn forward_predict(&self, x: &[f64], domain: usize) -> Result<ForwardTrace> {
        let t = self.trace(&Tensor2::new(1, x.len(), x.to_vec())?, domain, PredictionPart::Whole)?;
        Ok(ForwardTrace {
            shared: t.shared.map(|s| s.row(0).to_vec()),
            private: t.private.map(|p| p.row(0).to_vec()),
            penultimate: t.penultimate.row(0).to_vec(),
            probs: t.probs.row(0).to_vec(),
        })
    }

    /// Class probabilities for rows of mixed domains.
    pub fn predict_proba(&self, x: &Tensor2, domains: &[usize], part: PredictionPart) -> Result<Tensor2> {
        self.check_x(x)?;
        if domains.len() != x.rows() {
            return Err(MdalError::Dimension(format!(
                "{} domain ids for {} rows",
                domains.len(),
                x.rows()
            )));
        }
        let mut out = Tensor2::zeros(x.rows(), self.spec.classes);
        for (k, rows) in group_by_domain(domains, self.spec.domains)? {
            let t = self.trace(&x.select_rows(&rows), k, part)?;
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(r).copy_from_slice(t.probs.row(i));
            }
        }
        Ok(out)
    }

    /// Argmax predictions (ties go to the lowest class index).
    pub fn predict_labels(&self, x: &Tensor2, domains: &[usize], part: PredictionPart) -> Result<Vec<usize>> {
        let p = self.predict_proba(x, domains, part)?;
        Ok(p.iter_rows().map(argmax).collect())
    }

    pub fn split_part_predict(&self, x: &[f64], domain: usize, part: PredictionPart) -> Result<Vec<f64>> {
        if !self.kind().is_share_private() {
            return Err(MdalError::Config(format!(
                "part predictions need a share-private model, {} is not",
                self.kind()
            )));
        }
        let t = self.trace(&Tensor2::new(1, x.len(), x.to_vec())?, domain, part)?;
        Ok(t.probs.row(0).to_vec())
    }

    pub fn penultimate_embedding(&self, x: &[f64], domain: usize) -> Result<Vec<f64>> {
        Ok(self.forward_predict(x, domain)?.penultimate)
    }

    pub fn badge_gradient_embedding(&self, x: &[f64], domain: usize) -> Result<Vec<f64>> {
        let t = self.forward_predict(x, domain)?;
        Ok(badge_embedding(&t.probs, &t.penultimate))
    }

    /// Mean cross-entropy over the batch and gradients along the supervised path.
    pub fn supervised_loss(&self, batch: &LabeledBatch) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(MdalError::Input("supervised loss of an empty batch".into()));
        }
        let n = batch.len() as f64;
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        for (k, rows) in group_by_domain(&batch.domains, self.spec.domains)? {
            let xg = batch.x.select_rows(&rows);
            let labels: Vec<usize> = rows.iter().map(|&r| batch.labels[r]).collect();
            let pass = self.classifier_pass(&xg, k, PredictionPart::Whole)?;
            let (l, dlogits, _) = cross_entropy_scaled(&pass.logits, &labels, n)?;
            loss += l;
            self.classifier_backward(pass, k, &dlogits, &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// Class-probability conditioning for the conditional discriminator:
    /// one-hot labels where known, detached predictions elsewhere.
    pub fn discriminator_conditioning(&self, batch: &MixedBatch) -> Result<Tensor2> {
        let c = self.spec.classes;
        let mut cond = Tensor2::zeros(batch.len(), c);
        let unlabeled: Vec<usize> = (0..batch.len()).filter(|&r| batch.labels[r].is_none()).collect();
        if !unlabeled.is_empty() {
            let x = batch.x.select_rows(&unlabeled);
            let d: Vec<usize> = unlabeled.iter().map(|&r| batch.domains[r]).collect();
            let p = self.predict_proba(&x, &d, PredictionPart::Whole)?;
            for (i, &r) in unlabeled.iter().enumerate() {
                cond.row_mut(r).copy_from_slice(p.row(i));
            }
        }
        for (r, y) in batch.labels.iter().enumerate() {
            if let Some(y) = *y {
                if y >= c {
                    return Err(MdalError::Input(format!("label {y} out of range for {c} classes")));
                }
                cond.set(r, y, 1.0);
            }
        }
        Ok(cond)
    }

    /// Domain-discriminator cross-entropy with the shared features passed
    /// through gradient reversal. Discriminator gradients descend this loss;
    /// shared-extractor gradients are scaled by `−λ`.
    pub fn adversarial_loss(&self, batch: &MixedBatch) -> Result<(f64, Gradients)> {
        let cond = if self.kind() == ArchitectureKind::Can {
            Some(self.discriminator_conditioning(batch)?)
        } else {
            None
        };
        self.adversarial_loss_conditioned(batch, cond.as_ref())
    }

    /// [`ModelGraph::adversarial_loss`] with the conditioning matrix supplied
    /// by the caller (ignored unless the model is conditional).
    pub fn adversarial_loss_conditioned(
        &self,
        batch: &MixedBatch,
        cond: Option<&Tensor2>,
    ) -> Result<(f64, Gradients)> {
        let disc = self.discriminator.ok_or_else(|| {
            MdalError::Config(format!("{} has no domain discriminator", self.kind()))
        })?;
        if batch.is_empty() {
            return Err(MdalError::Input("adversarial loss of an empty batch".into()));
        }
        self.check_x(&batch.x)?;
        let conditional = self.kind() == ArchitectureKind::Can;
        if conditional {
            match cond {
                Some(c) if c.shape() == (batch.len(), self.spec.classes) => {}
                _ => {
                    return Err(MdalError::Dimension(
                        "conditional discriminator needs one class-probability row per instance".into(),
                    ))
                }
            }
        }
        let grl = GradientReversal::new(self.spec.lambda)?;
        let n = batch.len() as f64;
        let h = self.spec.hidden_dim;
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        for (k, rows) in group_by_domain(&batch.domains, self.spec.domains)? {
            let xg = batch.x.select_rows(&rows);
            let (hs, caches) = self.run_stack(&self.shared, &xg)?;
            let reversed = grl.forward(&hs);
            let disc_in = if conditional {
                reversed.hcat(&cond.expect("checked above").select_rows(&rows))?
            } else {
                reversed
            };
            let (logits, dcache) = self.layers[disc].forward(&disc_in)?;
            let (l, dlogits, _) = cross_entropy_scaled(&logits, &vec![k; rows.len()], n)?;
            loss += l;
            let (d_in, g) = self.layers[disc].backward(&dcache, &dlogits)?;
            grads.layers[disc].add_assign(&g);
            let (d_shared, _) = d_in.split_cols(h);
            self.stack_backward(&self.shared, &caches, grl.backward(&d_shared), &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// Structural consistency of a (possibly deserialized) model.
    pub fn validate(&self) -> Result<()> {
        let s = &self.spec;
        let bad = |what: &str| Err(MdalError::Input(format!("malformed {} model: {what}", s.kind)));
        if self.layers.len() != self.roles.len() {
            return bad("role list length");
        }
        let expect_head_in = if s.kind.is_share_private() { 2 * s.hidden_dim } else { s.hidden_dim };
        let dims = |li: usize, i: usize, o: usize| {
            self.layers
                .get(li)
                .is_some_and(|l| l.input_dim() == i && l.output_dim() == o && l.bias.len() == o)
        };
        if s.kind.has_shared_extractor() != !self.shared.is_empty()
            || s.kind.has_private_extractors() != !self.private.is_empty()
            || s.kind.has_discriminator() != self.discriminator.is_some()
        {
            return bad("component set does not match the architecture");
        }
        if self.shared.iter().any(|&li| !dims(li, s.input_dim, s.hidden_dim)) {
            return bad("shared extractor shape");
        }
        if !self.private.is_empty() && self.private.len() != s.domains {
            return bad("private extractor count");
        }
        if self.private.iter().flatten().any(|&li| !dims(li, s.input_dim, s.hidden_dim)) {
            return bad("private extractor shape");
        }
        let head_count = if s.kind.per_domain_classifiers() { s.domains } else { 1 };
        if self.heads.len() != head_count || self.heads.iter().any(|&li| !dims(li, expect_head_in, s.classes)) {
            return bad("classifier heads");
        }
        if let Some(li) = self.discriminator {
            let input = if s.kind == ArchitectureKind::Can { s.hidden_dim + s.classes } else { s.hidden_dim };
            if !dims(li, input, s.domains) {
                return bad("discriminator shape");
            }
        }
        if self.layers.iter().any(|l| !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite())) {
            return Err(MdalError::Numeric(format!("parameters of {} model", s.kind)));
        }
        Ok(())
    }
}
