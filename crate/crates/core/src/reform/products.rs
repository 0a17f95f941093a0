//! Exact linearization of tier-selector times load products.

use std::collections::BTreeMap;

use ies_milp::Relation;

use crate::bilevel::{Commodity, LinearConstraint, Owner, PriceProduct, PriceVars, Tag, VarId, VarTable};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProductBlock {
    pub rows: Vec<LinearConstraint>,
    /// `w[product][tier]` with `w = z * load`.
    pub links: Vec<Vec<VarId>>,
    /// Objective terms equal to `sum coeff * kappa * load`.
    pub revenue: Vec<(VarId, f64)>,
}

/// For every product and tier `j` adds `w = z_j * y` through
/// `w <= Y z_j`, `w <= y`, `w >= y - Y (1 - z_j)`, `w >= 0`, plus the
/// identity `sum_j w_j = y` that follows from `sum_j z_j = 1`.
pub fn linearize_products(
    products: &[PriceProduct],
    electric: &PriceVars,
    heat: &PriceVars,
    load_bounds: &BTreeMap<VarId, f64>,
    vars: &mut VarTable,
) -> Result<ProductBlock> {
    let mut block = ProductBlock {
        rows: Vec::new(),
        links: Vec::with_capacity(products.len()),
        revenue: Vec::new(),
    };
    for (i, &p) in products.iter().enumerate() {
        let y = p.load;
        let name = vars.vars[y].name.clone();
        let y_max = load_bounds
            .get(&y)
            .copied()
            .unwrap_or(vars.vars[y].upper)
            .min(vars.vars[y].upper);
        if !y_max.is_finite() {
            return Err(CoreError::Reformulation(format!(
                "load {name} has no finite upper bound; cannot linearize its price product"
            )));
        }
        if vars.vars[y].lower < 0.0 {
            return Err(CoreError::Reformulation(format!("load {name} may be negative")));
        }
        let pv = match p.commodity {
            Commodity::Electric => electric,
            Commodity::Heat => heat,
        };
        let tiers = &pv.tiers[p.hour];
        let mut ws = Vec::with_capacity(tiers.len());
        for (j, (&z, &g)) in tiers.iter().zip(&pv.grid).enumerate() {
            let w = vars.add(format!("w[{name}][{j}]"), 0.0, y_max, false, Owner::Auxiliary);
            let tag = Tag::ProductLinearization;
            block.rows.push(LinearConstraint::new(vec![(w, 1.0), (z, -y_max)], Relation::Le, 0.0, tag, format!("w_le_z[{i}][{j}]")));
            block.rows.push(LinearConstraint::new(vec![(w, 1.0), (y, -1.0)], Relation::Le, 0.0, tag, format!("w_le_y[{i}][{j}]")));
            block.rows.push(LinearConstraint::new(
                vec![(w, 1.0), (y, -1.0), (z, -y_max)],
                Relation::Ge,
                -y_max,
                tag,
                format!("w_ge_y[{i}][{j}]"),
            ));
            if g * p.coeff != 0.0 {
                block.revenue.push((w, g * p.coeff));
            }
            ws.push(w);
        }
        let mut sum: Vec<(VarId, f64)> = ws.iter().map(|&w| (w, 1.0)).collect();
        sum.push((y, -1.0));
        block.rows.push(LinearConstraint::new(sum, Relation::Eq, 0.0, Tag::ProductLinearization, format!("w_sum[{i}]")));
        block.links.push(ws);
    }
    Ok(block)
}
