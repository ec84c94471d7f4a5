//! Parameter tables, the scoring function and its analytic gradient.
//!
//! For a triple `(h, r, t)` the dynamic-mapping score is
//!
//! ```text
//! S_r(Q_e) = Q_e ⊗ P̂_e ⊗ V̂_r
//! f(h, r, t) = (S_r(Q_h) ⊗ Ŵ_r) · S_r(Q_t)
//! ```
//!
//! where `x̂` is the elementwise unit quaternion of a raw row. The entity
//! embeddings `Q` are used as stored. [`ModelVariant::QuatE`] drops the
//! transfer vectors and scores `(Q_h ⊗ Ŵ_r) · Q_t`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::data::Triple;
use crate::error::{Error, Result};
use crate::quaternion::{QuatSlice, Quaternion, QuaternionVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelVariant {
    /// Rotation only; the transfer tables are ignored.
    QuatE,
    /// Rotation with per-entity and per-relation transfer vectors.
    QuatDE,
}

impl ModelVariant {
    pub fn code(self) -> u8 {
        match self {
            ModelVariant::QuatE => 0,
            ModelVariant::QuatDE => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelVariant::QuatE),
            1 => Some(ModelVariant::QuatDE),
            _ => None,
        }
    }

    pub fn uses_transfer(self) -> bool {
        self == ModelVariant::QuatDE
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::QuatE => "quate",
            ModelVariant::QuatDE => "quatde",
        })
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quate" => Ok(ModelVariant::QuatE),
            "quatde" => Ok(ModelVariant::QuatDE),
            _ => Err(Error::InvalidConfig("variant must be `quate` or `quatde`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableId {
    /// `Q`, one row per entity.
    Entity,
    /// `W`, one row per relation.
    Relation,
    /// `P`, one row per entity.
    EntityTransfer,
    /// `V`, one row per relation.
    RelationTransfer,
}

impl TableId {
    pub const ALL: [TableId; 4] = [
        TableId::Entity,
        TableId::Relation,
        TableId::EntityTransfer,
        TableId::RelationTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Entity => "entity",
            TableId::Relation => "relation",
            TableId::EntityTransfer => "entity transfer",
            TableId::RelationTransfer => "relation transfer",
        }
    }
}

/// `rows × k` quaternions. Each component is a row-major `rows × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    k: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, k: usize) -> Self {
        let n = rows * k;
        Self {
            rows,
            k,
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            d: vec![0.0; n],
        }
    }

    pub fn identity(rows: usize, k: usize) -> Self {
        Self {
            a: vec![1.0; rows * k],
            ..Self::zeros(rows, k)
        }
    }

    /// Builds a table from four row-major component matrices.
    pub fn from_components(
        rows: usize,
        k: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        d: Vec<f64>,
    ) -> Result<Self> {
        for comp in [&a, &b, &c, &d] {
            if comp.len() != rows * k {
                return Err(Error::LengthMismatch {
                    expected: rows * k,
                    found: comp.len(),
                });
            }
        }
        Ok(Self { rows, k, a, b, c, d })
    }

    fn random<R: Rng + ?Sized>(rows: usize, k: usize, dist: &Uniform<f64>, rng: &mut R) -> Self {
        let mut t = Self::zeros(rows, k);
        for comp in [&mut t.a, &mut t.b, &mut t.c, &mut t.d] {
            for x in comp.iter_mut() {
                *x = dist.sample(rng);
            }
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// The `a`, `b`, `c`, `d` component matrices.
    pub fn components(&self) -> [&[f64]; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn components_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.a, &mut self.b, &mut self.c, &mut self.d]
    }

    #[inline]
    pub fn row(&self, r: usize) -> QuatSlice<'_> {
        let span = r * self.k..(r + 1) * self.k;
        QuatSlice {
            a: &self.a[span.clone()],
            b: &self.b[span.clone()],
            c: &self.c[span.clone()],
            d: &self.d[span],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, i: usize) -> Quaternion {
        let j = r * self.k + i;
        Quaternion::new(self.a[j], self.b[j], self.c[j], self.d[j])
    }

    #[inline]
    pub fn set(&mut self, r: usize, i: usize, q: Quaternion) {
        let j = r * self.k + i;
        self.a[j] = q.a;
        self.b[j] = q.b;
        self.c[j] = q.c;
        self.d[j] = q.d;
    }

    pub fn set_row(&mut self, r: usize, v: &QuaternionVector) -> Result<()> {
        if v.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: v.len(),
            });
        }
        for i in 0..self.k {
            self.set(r, i, v.get(i));
        }
        Ok(())
    }

    /// Multiplies every component of row `r` by `s`.
    pub fn scale_row(&mut self, r: usize, s: f64) {
        let span = r * self.k..(r + 1) * self.k;
        for comp in self.components_mut() {
            for x in &mut comp[span.clone()] {
                *x *= s;
            }
        }
    }

    /// Dot product of row `r` against a `k`-long query.
    #[inline]
    fn dot_row(&self, r: usize, query: &QuaternionVector) -> f64 {
        let row = self.row(r);
        let [qa, qb, qc, qd] = query.components();
        let mut acc = 0.0;
        for i in 0..self.k {
            acc += row.a[i] * qa[i] + row.b[i] * qb[i] + row.c[i] * qc[i] + row.d[i] * qd[i];
        }
        acc
    }

    fn normalized(&self) -> Result<Table> {
        let mut out = Table::zeros(self.rows, self.k);
        for r in 0..self.rows {
            for i in 0..self.k {
                out.set(r, i, self.get(r, i).normalize()?);
            }
        }
        Ok(out)
    }
}

/// The four trainable tables, stored raw. `W`, `P` and `V` are normalized
/// on the fly whenever they are used.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    k: usize,
    entities: Table,
    relations: Table,
    entity_transfer: Table,
    relation_transfer: Table,
}

impl ModelParams {
    /// Uniform initialization in `[-1/√(4k), 1/√(4k)]`, drawn table by table
    /// (`Q`, `W`, `P`, `V`) and component by component.
    pub fn random<R: Rng + ?Sized>(
        num_entities: usize,
        num_relations: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive"));
        }
        let bound = 1.0 / libm::sqrt(4.0 * k as f64);
        let dist = Uniform::new_inclusive(-bound, bound);
        let entities = Table::random(num_entities, k, &dist, rng);
        let relations = Table::random(num_relations, k, &dist, rng);
        let entity_transfer = Table::random(num_entities, k, &dist, rng);
        let relation_transfer = Table::random(num_relations, k, &dist, rng);
        Ok(Self {
            k,
            entities,
            relations,
            entity_transfer,
            relation_transfer,
        })
    }

    pub fn from_tables(
        k: usize,
        entities: Table,
        relations: Table,
        entity_transfer: Table,
        relation_transfer: Table,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive"));
        }
        for t in [&entities, &relations, &entity_transfer, &relation_transfer] {
            if t.dim() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: t.dim(),
                });
            }
        }
        if entity_transfer.rows() != entities.rows() {
            return Err(Error::LengthMismatch {
                expected: entities.rows(),
                found: entity_transfer.rows(),
            });
        }
        if relation_transfer.rows() != relations.rows() {
            return Err(Error::LengthMismatch {
                expected: relations.rows(),
                found: relation_transfer.rows(),
            });
        }
        Ok(Self {
            k,
            entities,
            relations,
            entity_transfer,
            relation_transfer,
        })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn table(&self, id: TableId) -> &Table {
        match id {
            TableId::Entity => &self.entities,
            TableId::Relation => &self.relations,
            TableId::EntityTransfer => &self.entity_transfer,
            TableId::RelationTransfer => &self.relation_transfer,
        }
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut Table {
        match id {
            TableId::Entity => &mut self.entities,
            TableId::Relation => &mut self.relations,
            TableId::EntityTransfer => &mut self.entity_transfer,
            TableId::RelationTransfer => &mut self.relation_transfer,
        }
    }

    /// Resets `P` and `V` to identity quaternions.
    pub fn set_transfer_identity(&mut self) {
        self.entity_transfer = Table::identity(self.num_entities(), self.k);
        self.relation_transfer = Table::identity(self.num_relations(), self.k);
    }

    pub fn check_row(&self, id: TableId, row: usize) -> Result<()> {
        let len = self.table(id).rows();
        if row < len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: id.name(),
                index: row,
                len,
            })
        }
    }

    fn check_triple(&self, t: Triple) -> Result<()> {
        self.check_row(TableId::Entity, t.head as usize)?;
        self.check_row(TableId::Relation, t.relation as usize)?;
        self.check_row(TableId::Entity, t.tail as usize)
    }
}

/// `entity ⊗ transfer̂ ⊗ relation_transfer̂`, left-associated.
pub fn map_entity(
    entity_row: QuatSlice<'_>,
    transfer_row: QuatSlice<'_>,
    relation_transfer_row: QuatSlice<'_>,
) -> Result<QuaternionVector> {
    let k = entity_row.len();
    for other in [transfer_row.len(), relation_transfer_row.len()] {
        if other != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: other,
            });
        }
    }
    let mut out = QuaternionVector::zeros(k);
    for i in 0..k {
        let p = transfer_row.get(i).normalize()?;
        let v = relation_transfer_row.get(i).normalize()?;
        out.set(i, entity_row.get(i) * p * v);
    }
    Ok(out)
}

/// Pointwise score of one triple. Higher means more plausible.
pub fn score(params: &ModelParams, variant: ModelVariant, triple: Triple) -> Result<f64> {
    params.check_triple(triple)?;
    let (h, r, t) = triple.indices();
    let mut acc = 0.0;
    for i in 0..params.k {
        let w = params.relations.get(r, i).normalize()?;
        let (sh, st) = match variant {
            ModelVariant::QuatE => (params.entities.get(h, i), params.entities.get(t, i)),
            ModelVariant::QuatDE => {
                let v = params.relation_transfer.get(r, i).normalize()?;
                let ph = params.entity_transfer.get(h, i).normalize()?;
                let pt = params.entity_transfer.get(t, i).normalize()?;
                (
                    params.entities.get(h, i) * ph * v,
                    params.entities.get(t, i) * pt * v,
                )
            }
        };
        acc += (sh * w).inner(st);
    }
    Ok(acc)
}

/// Scores `(h, r, e)` for every entity `e`.
pub fn score_all_tails(
    params: &ModelParams,
    variant: ModelVariant,
    head: u32,
    relation: u32,
) -> Result<Vec<f64>> {
    Scorer::new(params, variant)?.tails(head, relation)
}

/// Scores `(e, r, t)` for every entity `e`.
pub fn score_all_heads(
    params: &ModelParams,
    variant: ModelVariant,
    relation: u32,
    tail: u32,
) -> Result<Vec<f64>> {
    Scorer::new(params, variant)?.heads(relation, tail)
}

/// Read-only scoring context with the per-entity projections cached.
///
/// Right multiplication by a unit quaternion is orthogonal, so
/// `⟨x, y ⊗ v̂⟩ = ⟨x ⊗ v̂*, y⟩`. Every score then becomes a dot product
/// between a per-query vector and the cached `Q_e ⊗ P̂_e` rows.
#[derive(Debug, Clone)]
pub struct Scorer<'p> {
    params: &'p ModelParams,
    variant: ModelVariant,
    projected: Table,
    relations: Table,
    relation_transfer: Option<Table>,
}

impl<'p> Scorer<'p> {
    pub fn new(params: &'p ModelParams, variant: ModelVariant) -> Result<Self> {
        let relations = params.relations.normalized()?;
        let (projected, relation_transfer) = match variant {
            ModelVariant::QuatE => (params.entities.clone(), None),
            ModelVariant::QuatDE => {
                let mut projected = Table::zeros(params.num_entities(), params.k);
                for e in 0..params.num_entities() {
                    for i in 0..params.k {
                        let p = params.entity_transfer.get(e, i).normalize()?;
                        projected.set(e, i, params.entities.get(e, i) * p);
                    }
                }
                (projected, Some(params.relation_transfer.normalized()?))
            }
        };
        Ok(Self {
            params,
            variant,
            projected,
            relations,
            relation_transfer,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn num_entities(&self) -> usize {
        self.projected.rows()
    }

    fn tail_query(&self, head: usize, relation: usize) -> QuaternionVector {
        let mut q = QuaternionVector::zeros(self.params.k);
        for i in 0..self.params.k {
            let w = self.relations.get(relation, i);
            let x = self.projected.get(head, i);
            let y = match &self.relation_transfer {
                None => x * w,
                Some(vt) => {
                    let v = vt.get(relation, i);
                    x * v * w * v.conjugate()
                }
            };
            q.set(i, y);
        }
        q
    }

    fn head_query(&self, relation: usize, tail: usize) -> QuaternionVector {
        let mut q = QuaternionVector::zeros(self.params.k);
        for i in 0..self.params.k {
            let w = self.relations.get(relation, i).conjugate();
            let x = self.projected.get(tail, i);
            let y = match &self.relation_transfer {
                None => x * w,
                Some(vt) => {
                    let v = vt.get(relation, i);
                    x * v * w * v.conjugate()
                }
            };
            q.set(i, y);
        }
        q
    }

    fn score_all(&self, query: &QuaternionVector) -> Vec<f64> {
        (0..self.projected.rows())
            .map(|e| self.projected.dot_row(e, query))
            .collect()
    }

    pub fn tails(&self, head: u32, relation: u32) -> Result<Vec<f64>> {
        self.params.check_row(TableId::Entity, head as usize)?;
        self.params.check_row(TableId::Relation, relation as usize)?;
        Ok(self.score_all(&self.tail_query(head as usize, relation as usize)))
    }

    pub fn heads(&self, relation: u32, tail: u32) -> Result<Vec<f64>> {
        self.params.check_row(TableId::Relation, relation as usize)?;
        self.params.check_row(TableId::Entity, tail as usize)?;
        Ok(self.score_all(&self.head_query(relation as usize, tail as usize)))
    }

    pub fn score(&self, triple: Triple) -> Result<f64> {
        self.params.check_triple(triple)?;
        let (h, r, t) = triple.indices();
        Ok(self.projected.dot_row(t, &self.tail_query(h, r)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// Row-sparse gradient keyed by `(table, row)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    rows: BTreeMap<(TableId, u32), QuaternionVector>,
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, table: TableId, row: u32) -> Option<&QuaternionVector> {
        self.rows.get(&(table, row))
    }

    /// Adds `grad` into the `(table, row)` entry.
    pub fn add_row(&mut self, table: TableId, row: u32, grad: &QuaternionVector) -> Result<()> {
        match self.rows.get_mut(&(table, row)) {
            Some(existing) => existing.accumulate(grad),
            None => {
                self.rows.insert((table, row), grad.clone());
                Ok(())
            }
        }
    }

    pub fn merge(&mut self, other: &SparseGrad) -> Result<()> {
        for ((table, row), g) in &other.rows {
            self.add_row(*table, *row, g)?;
        }
        Ok(())
    }

    /// Entries in `(table, row)` order.
    pub fn iter(&self) -> impl Iterator<Item = (TableId, u32, &QuaternionVector)> {
        self.rows.iter().map(|(&(t, r), g)| (t, r, g))
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Gradient of a normalized quaternion's loss with respect to the raw one.
#[inline]
fn through_normalize(raw: Quaternion, unit: Quaternion, g: Quaternion) -> Quaternion {
    (g - unit.scale(unit.inner(g))).scale(1.0 / raw.norm())
}

/// Logistic loss of one labeled triple plus `lambda` times the squared norm
/// of its head and tail entity rows, with the gradient of that loss.
///
/// `W`, `P` and `V` only enter the score normalized, so their penalty is a
/// constant and is left out. The head and tail rows are charged once each,
/// so a self-loop `h == t` charges the shared row twice.
pub fn grad_triple(
    params: &ModelParams,
    variant: ModelVariant,
    triple: Triple,
    label: Label,
    lambda: f64,
) -> Result<(f64, SparseGrad)> {
    let mut grads = SparseGrad::new();
    let loss = grad_triple_into(params, variant, triple, label, lambda, &mut grads)?;
    Ok((loss, grads))
}

/// As [`grad_triple`], adding the gradient into `out`.
pub fn grad_triple_into(
    params: &ModelParams,
    variant: ModelVariant,
    triple: Triple,
    label: Label,
    lambda: f64,
    out: &mut SparseGrad,
) -> Result<f64> {
    params.check_triple(triple)?;
    let (h, r, t) = triple.indices();
    let k = params.k;
    let y = label.sign();
    let transfer = variant.uses_transfer();

    // Every score gradient is linear in d loss / d f, so one pass collects
    // d f / d row and the loss derivative is applied afterwards.
    let mut g_qh = QuaternionVector::zeros(k);
    let mut g_qt = QuaternionVector::zeros(k);
    let mut g_w = QuaternionVector::zeros(k);
    let mut g_ph = QuaternionVector::zeros(k);
    let mut g_pt = QuaternionVector::zeros(k);
    let mut g_v = QuaternionVector::zeros(k);
    let mut f = 0.0;
    let mut reg = 0.0;

    for i in 0..k {
        let qh = params.entities.get(h, i);
        let qt = params.entities.get(t, i);
        let w_raw = params.relations.get(r, i);
        let w = w_raw.normalize()?;
        reg += qh.norm_squared() + qt.norm_squared();

        if transfer {
            let ph_raw = params.entity_transfer.get(h, i);
            let pt_raw = params.entity_transfer.get(t, i);
            let v_raw = params.relation_transfer.get(r, i);
            let (ph, pt, v) = (ph_raw.normalize()?, pt_raw.normalize()?, v_raw.normalize()?);

            let xh = qh * ph;
            let sh = xh * v;
            let xt = qt * pt;
            let st = xt * v;
            let lh = sh * w;
            f += lh.inner(st);

            let g_sh = st * w.conjugate();
            let g_xh = g_sh * v.conjugate();
            let g_xt = lh * v.conjugate();
            let g_vn = xh.conjugate() * g_sh + xt.conjugate() * lh;

            g_qh.set(i, g_xh * ph.conjugate());
            g_qt.set(i, g_xt * pt.conjugate());
            g_w.set(i, through_normalize(w_raw, w, sh.conjugate() * st));
            g_ph.set(i, through_normalize(ph_raw, ph, qh.conjugate() * g_xh));
            g_pt.set(i, through_normalize(pt_raw, pt, qt.conjugate() * g_xt));
            g_v.set(i, through_normalize(v_raw, v, g_vn));
        } else {
            let lh = qh * w;
            f += lh.inner(qt);
            g_qh.set(i, qt * w.conjugate());
            g_qt.set(i, lh);
            g_w.set(i, through_normalize(w_raw, w, qh.conjugate() * qt));
        }
    }

    // d loss / d f for softplus(-y f)
    let df = -y * sigmoid(-y * f);
    for g in [&mut g_w, &mut g_ph, &mut g_pt, &mut g_v] {
        g.scale_in_place(df);
    }
    for (g, e) in [(&mut g_qh, h), (&mut g_qt, t)] {
        for i in 0..k {
            g.set(i, g.get(i).scale(df) + params.entities.get(e, i).scale(2.0 * lambda));
        }
    }

    out.add_row(TableId::Entity, triple.head, &g_qh)?;
    out.add_row(TableId::Entity, triple.tail, &g_qt)?;
    out.add_row(TableId::Relation, triple.relation, &g_w)?;
    if transfer {
        out.add_row(TableId::EntityTransfer, triple.head, &g_ph)?;
        out.add_row(TableId::EntityTransfer, triple.tail, &g_pt)?;
        out.add_row(TableId::RelationTransfer, triple.relation, &g_v)?;
    }

    Ok(softplus(-y * f) + lambda * reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(variant_seed: u64, k: usize) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(variant_seed);
        ModelParams::random(6, 3, k, &mut rng).unwrap()
    }

    #[test]
    fn initialization_bounds() {
        let p = toy(1, 16);
        let bound = 1.0 / (4.0f64 * 16.0).sqrt();
        for id in TableId::ALL {
            for comp in p.table(id).components() {
                assert!(comp.iter().all(|x| x.abs() <= bound));
            }
        }
        assert_eq!(p.table(TableId::Entity).rows(), 6);
        assert_eq!(p.table(TableId::RelationTransfer).rows(), 3);
    }

    #[test]
    fn map_entity_with_identity_transfer_is_noop() {
        let p = toy(2, 5);
        let id = QuaternionVector::identity(5);
        let m = map_entity(p.table(TableId::Entity).row(3), id.view(), id.view()).unwrap();
        assert_eq!(m, p.table(TableId::Entity).row(3).to_vector());
    }

    #[test]
    fn map_entity_single_component() {
        let qe = QuaternionVector::from_quaternions(&[Quaternion::new(0.5, -1.0, 2.0, 0.25)]);
        let pe = QuaternionVector::from_quaternions(&[Quaternion::new(0.0, 3.0, 0.0, 4.0)]);
        let vr = QuaternionVector::from_quaternions(&[Quaternion::new(1.0, 1.0, 1.0, 1.0)]);
        let m = map_entity(qe.view(), pe.view(), vr.view()).unwrap();
        let expected = qe.get(0)
            * Quaternion::new(0.0, 0.6, 0.0, 0.8)
            * Quaternion::new(0.5, 0.5, 0.5, 0.5);
        assert!((m.get(0) - expected).norm() < 1e-15);
        assert!((m.get(0).norm() - qe.get(0).norm()).abs() < 1e-12);
    }

    #[test]
    fn map_entity_preserves_component_norms() {
        let p = toy(3, 8);
        let m = map_entity(
            p.table(TableId::Entity).row(0),
            p.table(TableId::EntityTransfer).row(0),
            p.table(TableId::RelationTransfer).row(1),
        )
        .unwrap();
        for i in 0..8 {
            let before = p.table(TableId::Entity).get(0, i).norm();
            assert!((m.get(i).norm() - before).abs() < 1e-12 * before.max(1.0));
        }
    }

    #[test]
    fn map_entity_zero_transfer_fails() {
        let qe = QuaternionVector::identity(2);
        let zero = QuaternionVector::zeros(2);
        assert!(matches!(
            map_entity(qe.view(), zero.view(), qe.view()),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn score_single_component_by_hand() {
        // Q_h = i, W = j (unit), Q_t = k: (i ⊗ j) · k = k · k = 1.
        let entities = Table::from_components(
            2,
            1,
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 1.0],
        )
        .unwrap();
        let relations =
            Table::from_components(1, 1, vec![0.0], vec![0.0], vec![2.0], vec![0.0]).unwrap();
        let params = ModelParams::from_tables(
            1,
            entities,
            relations,
            Table::identity(2, 1),
            Table::identity(1, 1),
        )
        .unwrap();
        let t = Triple::new(0, 0, 1);
        assert_eq!(score(&params, ModelVariant::QuatE, t).unwrap(), 1.0);
        assert_eq!(score(&params, ModelVariant::QuatDE, t).unwrap(), 1.0);
        // Reversed: (k ⊗ j) · i = -i · i = -1.
        assert_eq!(
            score(&params, ModelVariant::QuatE, Triple::new(1, 0, 0)).unwrap(),
            -1.0
        );
    }

    #[test]
    fn identity_transfer_degenerates() {
        let mut p = toy(4, 7);
        p.set_transfer_identity();
        for h in 0..6 {
            for t in 0..6 {
                let tr = Triple::new(h, 1, t);
                let de = score(&p, ModelVariant::QuatDE, tr).unwrap();
                let e = score(&p, ModelVariant::QuatE, tr).unwrap();
                assert!((de - e).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn relation_scale_invariance() {
        let p = toy(5, 4);
        let mut scaled = p.clone();
        scaled.table_mut(TableId::Relation).scale_row(2, 3.0);
        scaled.table_mut(TableId::EntityTransfer).scale_row(1, 0.5);
        scaled.table_mut(TableId::RelationTransfer).scale_row(2, 7.0);
        for variant in [ModelVariant::QuatE, ModelVariant::QuatDE] {
            let tr = Triple::new(1, 2, 4);
            let a = score(&p, variant, tr).unwrap();
            let b = score(&scaled, variant, tr).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn batched_scores_match_pointwise() {
        let p = toy(6, 9);
        for variant in [ModelVariant::QuatE, ModelVariant::QuatDE] {
            let scorer = Scorer::new(&p, variant).unwrap();
            let tails = scorer.tails(2, 1).unwrap();
            let heads = scorer.heads(1, 5).unwrap();
            assert_eq!(tails.len(), 6);
            for e in 0..6u32 {
                let st = score(&p, variant, Triple::new(2, 1, e)).unwrap();
                let sh = score(&p, variant, Triple::new(e, 1, 5)).unwrap();
                assert!((tails[e as usize] - st).abs() <= 1e-10);
                assert!((heads[e as usize] - sh).abs() <= 1e-10);
            }
            assert!((scorer.score(Triple::new(2, 1, 4)).unwrap() - tails[4]).abs() <= 1e-15);
        }
    }

    #[test]
    fn small_model_scores_are_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::random(3, 1, 2, &mut rng).unwrap();
        let v = score_all_tails(&p, ModelVariant::QuatDE, 0, 0).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(score_all_heads(&p, ModelVariant::QuatDE, 0, 3).is_err());
    }

    #[test]
    fn out_of_range_indices() {
        let p = toy(7, 2);
        assert!(matches!(
            score(&p, ModelVariant::QuatDE, Triple::new(6, 0, 0)),
            Err(Error::IndexOutOfRange { index: 6, .. })
        ));
        assert!(score(&p, ModelVariant::QuatE, Triple::new(0, 3, 0)).is_err());
        assert!(grad_triple(&p, ModelVariant::QuatE, Triple::new(0, 0, 9), Label::Positive, 0.0)
            .is_err());
    }

    #[test]
    fn loss_at_zero_score() {
        let mut p = toy(8, 3);
        *p.table_mut(TableId::Entity) = Table::zeros(6, 3);
        let (loss, grads) =
            grad_triple(&p, ModelVariant::QuatDE, Triple::new(0, 0, 1), Label::Negative, 0.0)
                .unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grads.len(), 6);

        // Zero tail keeps f = 0 while the head row carries the penalty.
        let lambda = 0.1;
        let mut p = toy(8, 3);
        for i in 0..3 {
            p.table_mut(TableId::Entity).set(1, i, Quaternion::ZERO);
        }
        let reg: f64 = p.table(TableId::Entity).row(0).iter().map(|q| q.norm_squared()).sum();
        for variant in [ModelVariant::QuatE, ModelVariant::QuatDE] {
            let (loss, _) =
                grad_triple(&p, variant, Triple::new(0, 0, 1), Label::Positive, lambda).unwrap();
            assert!((loss - core::f64::consts::LN_2 - lambda * reg).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_positive_leaves_only_penalty() {
        // Q_h = Q_t = 40 (real), W = 1: f = 1600 per component.
        let entities = Table::from_components(
            2,
            1,
            vec![40.0, 40.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .unwrap();
        let params = ModelParams::from_tables(
            1,
            entities,
            Table::identity(1, 1),
            Table::identity(2, 1),
            Table::identity(1, 1),
        )
        .unwrap();
        let lambda = 0.05;
        let (loss, _) =
            grad_triple(&params, ModelVariant::QuatDE, Triple::new(0, 0, 1), Label::Positive, lambda)
                .unwrap();
        assert!((loss - lambda * 3200.0).abs() < 1e-9);
        let (loss, _) =
            grad_triple(&params, ModelVariant::QuatDE, Triple::new(0, 0, 1), Label::Negative, 0.0)
                .unwrap();
        assert!((loss - 1600.0).abs() < 1e-9);
    }

    #[test]
    fn loss_saturates_to_regularizer() {
        assert_eq!(softplus(-1e4), 0.0);
        assert!((softplus(1e4) - 1e4).abs() < 1e-9);
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn self_loop_merges_rows() {
        let p = toy(9, 2);
        let (_, g) =
            grad_triple(&p, ModelVariant::QuatDE, Triple::new(2, 1, 2), Label::Positive, 0.1)
                .unwrap();
        assert_eq!(g.len(), 4);
        let (_, g) =
            grad_triple(&p, ModelVariant::QuatE, Triple::new(2, 1, 3), Label::Positive, 0.1)
                .unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.get(TableId::EntityTransfer, 2).is_none());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("QuatDE".parse::<ModelVariant>().unwrap(), ModelVariant::QuatDE);
        assert_eq!("quate".parse::<ModelVariant>().unwrap(), ModelVariant::QuatE);
        assert!("transe".parse::<ModelVariant>().is_err());
        for v in [ModelVariant::QuatE, ModelVariant::QuatDE] {
            assert_eq!(ModelVariant::from_code(v.code()), Some(v));
        }
        assert_eq!(ModelVariant::from_code(7), None);
    }
}
