use rayon::prelude::*;

use super::{KnnResult, NeighborSet, NoVisits, Query, Variant, VisitCounter, VisitStats, Visits};
use crate::error::{Error, Result};
use crate::morton::QuantizedPoint;
use crate::tree::ZdTree;

impl ZdTree {
    /// k nearest neighbors of every stored point, sorted by point id.
    ///
    /// The leaf variant starts each search at the leaf already holding the
    /// point; root and bit variants run their full query per point. Points
    /// are processed leaf by leaf in Morton order, so each worker handles a
    /// contiguous, spatially coherent run.
    pub fn knn_graph(&self, k: usize, variant: Variant) -> Result<Vec<KnnResult>> {
        Ok(self.graph_impl::<NoVisits>(k, variant)?.into_iter().map(|(r, _)| r).collect())
    }

    /// [`ZdTree::knn_graph`] with per-query node-visit statistics.
    pub fn knn_graph_with_stats(&self, k: usize, variant: Variant) -> Result<(Vec<KnnResult>, VisitStats)> {
        let rows = self.graph_impl::<Visits>(k, variant)?;
        let stats = VisitStats::from_counts(rows.iter().map(|(_, v)| v.0));
        Ok((rows.into_iter().map(|(r, _)| r).collect(), stats))
    }

    fn graph_impl<V: VisitCounter + Default + Send>(&self, k: usize, variant: Variant) -> Result<Vec<(KnnResult, V)>> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        let leaves = self.leaves();
        let mut rows: Vec<(KnnResult, V)> = leaves
            .par_iter()
            .flat_map_iter(|&leaf| {
                self.node(leaf).points().iter().map(move |p| {
                    let q = Query::in_set(p);
                    let mut v = V::default();
                    let r = match variant {
                        Variant::Leaf => {
                            let mut set = NeighborSet::new(k);
                            self.search_up_unchecked(leaf, &q, &mut set, &mut v);
                            KnnResult::new(q.id, set)
                        }
                        Variant::Root => self.knn_root_with(&q, k, &mut v).expect("k > 0"),
                        Variant::Bit => self.knn_bit_with(&q, k, &mut v).expect("k > 0"),
                    };
                    (r, v)
                })
            })
            .collect();
        rows.par_sort_unstable_by_key(|(r, _)| r.query);
        Ok(rows)
    }

    /// Answers queries that are not stored in the tree (no self exclusion).
    /// Results come back in input order.
    ///
    /// With `presort`, queries are processed in Morton order so neighboring
    /// queries touch neighboring nodes. `Variant::Leaf` has no known leaf for
    /// an external query and behaves like `Variant::Bit`.
    pub fn query_batch(
        &self,
        queries: &[QuantizedPoint],
        k: usize,
        variant: Variant,
        presort: bool,
    ) -> Result<Vec<KnnResult>> {
        Ok(self
            .batch_impl::<NoVisits>(queries, k, variant, presort)?
            .into_iter()
            .map(|(r, _)| r)
            .collect())
    }

    pub fn query_batch_with_stats(
        &self,
        queries: &[QuantizedPoint],
        k: usize,
        variant: Variant,
        presort: bool,
    ) -> Result<(Vec<KnnResult>, VisitStats)> {
        let rows = self.batch_impl::<Visits>(queries, k, variant, presort)?;
        let stats = VisitStats::from_counts(rows.iter().map(|(_, v)| v.0));
        Ok((rows.into_iter().map(|(r, _)| r).collect(), stats))
    }

    fn batch_impl<V: VisitCounter + Default + Send>(
        &self,
        queries: &[QuantizedPoint],
        k: usize,
        variant: Variant,
        presort: bool,
    ) -> Result<Vec<(KnnResult, V)>> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        let universe = self.quantizer().universe();
        if queries.iter().any(|p| !universe.contains(&p.grid)) {
            return Err(Error::QueryOutsideNode);
        }
        let run = |p: &QuantizedPoint| {
            let q = Query::external(p);
            let mut v = V::default();
            let r = match variant {
                Variant::Root => self.knn_root_with(&q, k, &mut v),
                Variant::Leaf | Variant::Bit => self.knn_bit_with(&q, k, &mut v),
            }
            .expect("validated above");
            (r, v)
        };
        if !presort {
            return Ok(queries.par_iter().map(run).collect());
        }
        let mut order: Vec<u32> = (0..queries.len() as u32).collect();
        order.par_sort_unstable_by_key(|&i| (queries[i as usize].key, i));
        let mut rows: Vec<(u32, (KnnResult, V))> = order
            .par_iter()
            .map(|&i| (i, run(&queries[i as usize])))
            .collect();
        rows.par_sort_unstable_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, r)| r).collect())
    }
}
